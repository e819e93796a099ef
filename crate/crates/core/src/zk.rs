//! Precise zero knowledge, checked by exhaustive tape enumeration, and the
//! inequality between the value of talking to a zero-knowledge prover and
//! the value of a computational speedup.
//!
//! A simulator is a non-interactive randomized algorithm that outputs a
//! view of the verifier. It is precise when (1) its output distribution
//! equals the distribution of real views, and (2) on every tape, running
//! the verifier on the simulated view costs at most p of what the verifier
//! spends on that view.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conversation::{
    act_on_view, conversation_outcomes, converse, enumerate_conversations, value_of_conversation,
    ConversationConfig, ConversationValue, Exchange, FnInformant, Informant, InteractiveEntry,
    InteractiveMachine, Move, Msg, Response, Silent, View,
};
use crate::decision::{
    bits_of, Bits, ComplexityUtility, ComputationalProblem, JointPrior, Labels, MachineSet,
    OutcomeDistribution, StateIx, TypeIx,
};
use crate::error::{Error, Result};
use crate::machine::{StrategyTree, TreeNode};
use crate::scalar::Scalar;
use crate::speedup::{value_of_p_speedup_dists, SpeedupFunction, SpeedupValue};
use crate::tape::{enumerate_tapes, CoinSource, Interrupt, PrefixCoins, SharedTape};
use crate::Exact;

type Language = dyn Fn(&[bool]) -> bool + Send + Sync;

/// A decision problem whose states are instances x ∈ {0,1}^n and whose
/// types are x followed by auxiliary input z. Machines are interactive
/// verifiers reading the type; the prover reads the state.
#[derive(Clone)]
pub struct ZkFamily<T> {
    pub n: usize,
    language: Arc<Language>,
    pub problem: ComputationalProblem<T>,
}

impl<T: fmt::Debug> fmt::Debug for ZkFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ZkFamily")
            .field("n", &self.n)
            .field("problem", &self.problem)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ZkFamily<T> {
    pub fn new(
        n: usize,
        language: impl Fn(&[bool]) -> bool + Send + Sync + 'static,
        problem: ComputationalProblem<T>,
    ) -> Self {
        ZkFamily {
            n,
            language: Arc::new(language),
            problem,
        }
    }

    /// Builds the problem from weighted (x, z) pairs. States are the
    /// distinct x, types the distinct x;z, in first-appearance order.
    pub fn from_support(
        n: usize,
        language: impl Fn(&[bool]) -> bool + Send + Sync + 'static,
        support: Vec<(Bits, Bits, T)>,
        actions: Labels,
        utility: ComplexityUtility<T>,
    ) -> Result<Self> {
        let mut states: Vec<Bits> = Vec::new();
        let mut types: Vec<Bits> = Vec::new();
        let mut entries = Vec::new();
        for (x, z, mass) in support {
            let s = match states.iter().position(|b| *b == x) {
                Some(i) => i,
                None => {
                    states.push(x.clone());
                    states.len() - 1
                }
            };
            let xz: Bits = x.iter().chain(&z).copied().collect();
            let t = match types.iter().position(|b| *b == xz) {
                Some(i) => i,
                None => {
                    types.push(xz);
                    types.len() - 1
                }
            };
            entries.push((StateIx(s), TypeIx(t), mass));
        }
        let prior = JointPrior::from_entries(states.len(), types.len(), entries)?;
        let state_labels = Labels::named(states.iter().map(|b| crate::decision::render_bits(b)))?;
        let type_labels = Labels::named(types.iter().map(|b| {
            let (x, z) = b.split_at(n.min(b.len()));
            format!(
                "{};{}",
                crate::decision::render_bits(x),
                crate::decision::render_bits(z)
            )
        }))?;
        let problem = ComputationalProblem::new(
            state_labels,
            type_labels,
            actions,
            prior,
            utility,
            MachineSet::new(),
        )?
        .with_state_bits(states)?
        .with_type_bits(types)?;
        Ok(Self::new(n, language, problem))
    }

    pub fn in_language(&self, x: &[bool]) -> bool {
        (self.language)(x)
    }

    /// The instance part of a type.
    pub fn instance_of(&self, t: TypeIx) -> &[bool] {
        let bits = &self.problem.type_bits[t.0];
        &bits[..self.n.min(bits.len())]
    }

    /// Support types, each once.
    pub fn support_types(&self) -> Vec<TypeIx> {
        let set: BTreeSet<TypeIx> = self.problem.prior.iter().map(|(_, t, _)| t).collect();
        set.into_iter().collect()
    }

    /// Checks membership in the class: positive mass only at s = x,
    /// t = x;z with x ∈ L, and a utility declared monotone in complexity.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if !p.utility.is_monotone() {
            return Err(Error::OutsideFamily(
                "utility is not declared monotone in complexity".into(),
            ));
        }
        for (s, t, _) in p.prior.iter() {
            let x = &p.state_bits[s.0];
            let tb = &p.type_bits[t.0];
            if x.len() != self.n {
                return Err(Error::OutsideFamily(format!(
                    "state {} is not an instance of length {}",
                    p.states.name(s.0),
                    self.n
                )));
            }
            if tb.len() < self.n || tb[..self.n] != x[..] {
                return Err(Error::OutsideFamily(format!(
                    "type {} does not start with state {}",
                    p.types.name(t.0),
                    p.states.name(s.0)
                )));
            }
            if !self.in_language(x) {
                return Err(Error::OutsideFamily(format!(
                    "instance {} is not in the language",
                    p.states.name(s.0)
                )));
            }
        }
        Ok(())
    }
}

/// A probabilistic algorithm producing a verifier view from the verifier's
/// input (x, z), together with its own complexity on that run.
pub trait Simulator: Send + Sync + fmt::Debug {
    fn simulate(
        &self,
        input: &[bool],
        coins: &mut dyn CoinSource,
    ) -> Result<(View, u64), Interrupt>;
}

type CostFn = dyn Fn(&[bool], usize, usize) -> u64 + Send + Sync;

/// Runs the verifier against a simulated prover on one shared coin
/// stream. The prover's replies are computed by the simulator itself, so
/// the view distribution is the real one; the cost function charges for
/// that work given (x, rounds, coins drawn).
#[derive(Clone)]
pub struct ReplaySimulator {
    pub verifier: Arc<dyn InteractiveMachine>,
    pub prover: Arc<dyn Informant>,
    pub n: usize,
    pub round_bound: usize,
    cost: Arc<CostFn>,
}

impl ReplaySimulator {
    pub fn new(
        verifier: Arc<dyn InteractiveMachine>,
        prover: Arc<dyn Informant>,
        n: usize,
        round_bound: usize,
        cost: impl Fn(&[bool], usize, usize) -> u64 + Send + Sync + 'static,
    ) -> Self {
        ReplaySimulator {
            verifier,
            prover,
            n,
            round_bound,
            cost: Arc::new(cost),
        }
    }
}

impl fmt::Debug for ReplaySimulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReplaySimulator")
            .field("verifier", &self.verifier)
            .field("prover", &self.prover)
            .finish_non_exhaustive()
    }
}

impl Simulator for ReplaySimulator {
    fn simulate(
        &self,
        input: &[bool],
        coins: &mut dyn CoinSource,
    ) -> Result<(View, u64), Interrupt> {
        let x = &input[..self.n.min(input.len())];
        let tape = SharedTape::new(coins);
        let out = converse(
            self.prover.as_ref(),
            self.verifier.as_ref(),
            x,
            input,
            &mut tape.party(0),
            &mut tape.party(1),
            self.round_bound,
        )?;
        let cost = (self.cost)(x, out.view.history.len(), tape.consumed());
        Ok((out.view, cost))
    }
}

/// Always outputs the same view.
#[derive(Debug, Clone)]
pub struct ConstantSimulator {
    pub view: View,
    pub cost: u64,
}

impl Simulator for ConstantSimulator {
    fn simulate(
        &self,
        _input: &[bool],
        _coins: &mut dyn CoinSource,
    ) -> Result<(View, u64), Interrupt> {
        Ok((self.view.clone(), self.cost))
    }
}

type SimulateFn =
    dyn Fn(&[bool], &mut dyn CoinSource) -> Result<(View, u64), Interrupt> + Send + Sync;

#[derive(Clone)]
pub struct FnSimulator(pub Arc<SimulateFn>);

impl FnSimulator {
    pub fn new(
        f: impl Fn(&[bool], &mut dyn CoinSource) -> Result<(View, u64), Interrupt>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        FnSimulator(Arc::new(f))
    }
}

impl fmt::Debug for FnSimulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnSimulator")
    }
}

impl Simulator for FnSimulator {
    fn simulate(
        &self,
        input: &[bool],
        coins: &mut dyn CoinSource,
    ) -> Result<(View, u64), Interrupt> {
        (self.0)(input, coins)
    }
}

/// Counts how many leading coins a computation read.
struct Counting<'c> {
    inner: &'c mut dyn CoinSource,
    used: usize,
}

impl CoinSource for Counting<'_> {
    fn coin(&mut self, i: usize) -> Result<bool, Interrupt> {
        let b = self.inner.coin(i)?;
        self.used = self.used.max(i + 1);
        Ok(b)
    }
}

/// Adds `extra` to the inner simulator's cost at input `at`, on the half
/// of the tapes whose first coin after the inner run is 1. Used to inject
/// a single-point precision violation.
#[derive(Debug, Clone)]
pub struct Spiked {
    pub inner: Arc<dyn Simulator>,
    pub at: Bits,
    pub extra: u64,
}

impl Simulator for Spiked {
    fn simulate(
        &self,
        input: &[bool],
        coins: &mut dyn CoinSource,
    ) -> Result<(View, u64), Interrupt> {
        let mut counting = Counting {
            inner: coins,
            used: 0,
        };
        let (view, cost) = self.inner.simulate(input, &mut counting)?;
        if input != self.at.as_slice() {
            return Ok((view, cost));
        }
        let used = counting.used;
        let flip = counting.inner.coin(used)?;
        Ok((view, if flip { cost + self.extra } else { cost }))
    }
}

/// How the complexity of running the verifier on a simulator's output is
/// composed from the two parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CompositionRule {
    /// Simulator cost plus verifier cost: the cost of running one after
    /// the other.
    #[default]
    Sum,
    /// The larger of the two, for measures such as peak space.
    Max,
}

impl CompositionRule {
    pub fn compose(self, simulator: u64, verifier: u64) -> u64 {
        match self {
            CompositionRule::Sum => simulator.saturating_add(verifier),
            CompositionRule::Max => simulator.max(verifier),
        }
    }
}

/// Tape bounds for the real interaction and the simulator, and the
/// composition rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZkConfig {
    /// Coins per party in the real interaction.
    pub tape_len: usize,
    /// Coins available to the simulator.
    pub sim_tape_len: usize,
    pub round_bound: usize,
    pub rule: CompositionRule,
}

impl ZkConfig {
    /// A simulator tape long enough to replay both parties.
    pub fn new(tape_len: usize) -> Self {
        ZkConfig {
            tape_len,
            sim_tape_len: 2 * tape_len + 1,
            round_bound: 16,
            rule: CompositionRule::Sum,
        }
    }

    fn conversation(&self) -> ConversationConfig {
        ConversationConfig {
            tape_len: self.tape_len,
            round_bound: self.round_bound,
        }
    }
}

/// A view whose real and simulated probabilities differ.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMismatch<T> {
    pub view: View,
    pub real: T,
    pub simulated: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition1<T> {
    pub ty: TypeIx,
    pub pass: bool,
    pub mismatches: Vec<ViewMismatch<T>>,
}

/// Precision at one simulator tape branch, which stands for every tape
/// extending `tape`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition2 {
    pub ty: TypeIx,
    pub tape: Bits,
    pub simulator_cost: u64,
    /// 𝒞(V′, v) on the simulated view; `None` when V′ cannot produce it.
    pub verifier_cost: Option<u64>,
    pub composite: u64,
    /// p(verifier_cost).
    pub bound: Option<u64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorReport<T> {
    pub machine: String,
    pub condition1: Vec<Condition1<T>>,
    pub condition2: Vec<Condition2>,
    pub precision: SpeedupFunction,
}

impl<T> SimulatorReport<T> {
    pub fn condition1_holds(&self) -> bool {
        self.condition1.iter().all(|c| c.pass)
    }

    pub fn condition2_holds(&self) -> bool {
        self.condition2.iter().all(|c| c.pass)
    }

    pub fn passed(&self) -> bool {
        self.condition1_holds() && self.condition2_holds()
    }
}

fn real_views<T: Scalar>(
    prover: &dyn Informant,
    verifier: &dyn InteractiveMachine,
    x: &[bool],
    input: &[bool],
    config: &ZkConfig,
) -> Result<BTreeMap<View, T>> {
    let mut dist: BTreeMap<View, T> = BTreeMap::new();
    for b in enumerate_conversations(prover, verifier, x, input, config.conversation())? {
        let w = T::half_pow(b.bits());
        let slot = dist.entry(b.value.view).or_insert_with(T::zero);
        *slot = std::mem::replace(slot, T::zero()) + w;
    }
    Ok(dist)
}

struct SimBranch {
    tape: Bits,
    view: View,
    cost: u64,
}

fn simulated_runs(
    simulator: &dyn Simulator,
    input: &[bool],
    config: &ZkConfig,
) -> Result<Vec<SimBranch>> {
    Ok(enumerate_tapes(1, config.sim_tape_len, |p| {
        simulator.simulate(input, &mut PrefixCoins::new(&p[0], 0))
    })?
    .into_iter()
    .map(|b| SimBranch {
        tape: b.prefixes.into_iter().next().unwrap_or_default(),
        view: b.value.0,
        cost: b.value.1,
    })
    .collect())
}

/// Checks both precision conditions for one verifier and its simulator at
/// every support type, enumerating all tapes of both sides.
pub fn check_simulator_conditions<T: Scalar>(
    family: &ZkFamily<T>,
    prover: &dyn Informant,
    verifier: &InteractiveEntry,
    simulator: &dyn Simulator,
    p: &SpeedupFunction,
    config: &ZkConfig,
) -> Result<SimulatorReport<T>> {
    p.validate()?;
    let per_type = family
        .support_types()
        .into_par_iter()
        .map(|t| {
            let input = &family.problem.type_bits[t.0];
            let x = family.instance_of(t);
            let real = real_views::<T>(prover, verifier.machine.as_ref(), x, input, config)?;
            let runs = simulated_runs(simulator, input, config)?;
            let mut sim: BTreeMap<View, T> = BTreeMap::new();
            for r in &runs {
                let slot = sim.entry(r.view.clone()).or_insert_with(T::zero);
                *slot = std::mem::replace(slot, T::zero()) + T::half_pow(r.tape.len());
            }
            let views: BTreeSet<&View> = real.keys().chain(sim.keys()).collect();
            let mismatches: Vec<ViewMismatch<T>> = views
                .into_iter()
                .filter_map(|v| {
                    let a = real.get(v).cloned().unwrap_or_else(T::zero);
                    let b = sim.get(v).cloned().unwrap_or_else(T::zero);
                    (a != b).then(|| ViewMismatch {
                        view: v.clone(),
                        real: a,
                        simulated: b,
                    })
                })
                .collect();
            let c1 = Condition1 {
                ty: t,
                pass: mismatches.is_empty(),
                mismatches,
            };
            let mut c2 = Vec::with_capacity(runs.len());
            for r in runs {
                let verifier_cost =
                    act_on_view(verifier.machine.as_ref(), input, &r.view)?.map(|o| o.complexity);
                let composite = match verifier_cost {
                    Some(v) => config.rule.compose(r.cost, v),
                    None => r.cost,
                };
                let bound = verifier_cost.map(|v| p.apply(v));
                c2.push(Condition2 {
                    ty: t,
                    tape: r.tape,
                    simulator_cost: r.cost,
                    verifier_cost,
                    composite,
                    bound,
                    pass: bound.is_some_and(|b| composite <= b),
                });
            }
            Ok((c1, c2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (condition1, c2): (Vec<_>, Vec<_>) = per_type.into_iter().unzip();
    Ok(SimulatorReport {
        machine: verifier.id.clone(),
        condition1,
        condition2: c2.into_iter().flatten().collect(),
        precision: p.clone(),
    })
}

/// Which complexity a simulated machine reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charge {
    /// The composed cost of simulating and then running the verifier.
    Composite,
    /// The verifier's cost on the simulated view alone.
    Rebound,
}

/// The non-interactive machine M′(v) = M(S(v)).
#[derive(Debug, Clone)]
pub struct SimulatedMachine {
    pub verifier: Arc<dyn InteractiveMachine>,
    pub simulator: Arc<dyn Simulator>,
    pub rule: CompositionRule,
    pub charge: Charge,
}

/// One run of a simulated machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedRun {
    pub view: View,
    pub action: crate::decision::ActionIx,
    pub composite: u64,
    pub rebound: u64,
}

pub fn build_simulated_machine(
    verifier: Arc<dyn InteractiveMachine>,
    simulator: Arc<dyn Simulator>,
    rule: CompositionRule,
) -> SimulatedMachine {
    SimulatedMachine {
        verifier,
        simulator,
        rule,
        charge: Charge::Composite,
    }
}

impl SimulatedMachine {
    pub fn charging(&self, charge: Charge) -> Self {
        SimulatedMachine {
            charge,
            ..self.clone()
        }
    }

    pub fn run(
        &self,
        input: &[bool],
        coins: &mut dyn CoinSource,
    ) -> Result<SimulatedRun, Interrupt> {
        let (view, sim_cost) = self.simulator.simulate(input, coins)?;
        if !input.starts_with(&view.type_prefix) {
            return Err(Error::ViewShape("simulated view does not match the input".into()).into());
        }
        let Some(o) = act_on_view(self.verifier.as_ref(), input, &view)? else {
            return Err(
                Error::ViewShape("the verifier cannot produce the simulated view".into()).into(),
            );
        };
        Ok(SimulatedRun {
            view,
            action: o.action,
            composite: self.rule.compose(sim_cost, o.complexity),
            rebound: o.complexity,
        })
    }
}

impl InteractiveMachine for SimulatedMachine {
    fn respond(
        &self,
        input: &[bool],
        history: &[Exchange],
        coins: &mut dyn CoinSource,
    ) -> Result<Response, Interrupt> {
        if !history.is_empty() {
            return Err(Error::OffTree.into());
        }
        let run = self.run(input, coins)?;
        Ok(Response {
            mv: Move::Act(run.action),
            complexity: match self.charge {
                Charge::Composite => run.composite,
                Charge::Rebound => run.rebound,
            },
            type_read: input.len(),
        })
    }
}

/// A verifier with its simulator.
#[derive(Debug, Clone)]
pub struct SimulatedVerifier {
    pub entry: InteractiveEntry,
    pub simulator: Arc<dyn Simulator>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocBoundReport<T> {
    pub simulators: Vec<SimulatorReport<T>>,
    /// Absent when a simulator fails its conditions.
    pub voc: Option<ConversationValue<T>>,
    pub speedup: Option<SpeedupValue<T>>,
    pub inequality_holds: Option<bool>,
}

impl<T> VocBoundReport<T> {
    pub fn passed(&self) -> bool {
        self.simulators.iter().all(SimulatorReport::passed) && self.inequality_holds == Some(true)
    }
}

/// Checks voc(P) ≤ value of a p-speedup on one family.
///
/// The machine set holds every verifier and every composite M(S(·)). The
/// value of conversation is taken over that whole set; the speedup value
/// compares the same set run without the prover (composites at their
/// composed cost) before and after the best admissible p-speedup.
pub fn check_theorem1_instance<T: Scalar>(
    family: &ZkFamily<T>,
    prover: &dyn Informant,
    machines: &[SimulatedVerifier],
    p: &SpeedupFunction,
    config: &ZkConfig,
) -> Result<VocBoundReport<T>> {
    family.validate()?;
    if machines.is_empty() {
        return Err(Error::EmptyMachineSet);
    }
    let simulators = machines
        .iter()
        .map(|m| {
            check_simulator_conditions(family, prover, &m.entry, m.simulator.as_ref(), p, config)
        })
        .collect::<Result<Vec<_>>>()?;
    if !simulators.iter().all(SimulatorReport::passed) {
        return Ok(VocBoundReport {
            simulators,
            voc: None,
            speedup: None,
            inequality_holds: None,
        });
    }
    let mut full: Vec<InteractiveEntry> = machines.iter().map(|m| m.entry.clone()).collect();
    for m in machines {
        let composite =
            build_simulated_machine(m.entry.machine.clone(), m.simulator.clone(), config.rule);
        full.push(InteractiveEntry::new(
            format!("{}∘S", m.entry.id),
            Arc::new(composite),
        ));
    }
    let conv = ConversationConfig {
        tape_len: config.tape_len.max(config.sim_tape_len),
        round_bound: config.round_bound,
    };
    let problem = &family.problem;
    let voc = value_of_conversation(problem, prover, &full, conv)?;
    let dists: Vec<OutcomeDistribution> = full
        .par_iter()
        .map(|m| conversation_outcomes(problem, &Silent, m.machine.as_ref(), conv))
        .collect::<Result<_>>()?;
    let speedup = value_of_p_speedup_dists(problem, &dists, p)?;
    let holds = voc.value <= speedup.value;
    Ok(VocBoundReport {
        simulators,
        voc: Some(voc),
        speedup: Some(speedup),
        inequality_holds: Some(holds),
    })
}

/// Replies to the k-th message with the k-th prover coin.
#[derive(Debug, Clone)]
struct CoinProver {
    alphabet: Vec<Msg>,
}

impl Informant for CoinProver {
    fn alphabet(&self) -> &[Msg] {
        &self.alphabet
    }

    fn reply(
        &self,
        _state: &[bool],
        received: &[Msg],
        coins: &mut dyn CoinSource,
    ) -> Result<Option<Msg>, Interrupt> {
        let bit = coins.coin(received.len() - 1)?;
        Ok(Some(if bit { "1" } else { "0" }.to_string()))
    }
}

/// Which prover a generated family uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyProver {
    /// Always answers `ok`.
    Constant,
    /// Answers with the secret bit f(x).
    RevealSecret,
    /// Answers with a fresh coin.
    RandomBit,
}

/// A generated family with a prover, verifiers, their simulators, the
/// precision and the tape bounds.
#[derive(Debug, Clone)]
pub struct ToyFamily {
    pub family: ZkFamily<Exact>,
    pub prover_kind: ToyProver,
    pub prover: Arc<dyn Informant>,
    pub machines: Vec<SimulatedVerifier>,
    pub p: SpeedupFunction,
    pub config: ZkConfig,
    /// Per-read cost of computing the secret alone.
    pub read_cost: u64,
    pub ask_cost: u64,
}

pub const ASK: &str = "secret?";

fn decide_secret(x_len: usize, secret: &HashMap<Bits, bool>, read_cost: u64) -> TreeNode {
    fn go(prefix: &mut Bits, n: usize, secret: &HashMap<Bits, bool>, cost: u64) -> TreeNode {
        if prefix.len() == n {
            return TreeNode::act(usize::from(secret[prefix.as_slice()]), 0);
        }
        let i = prefix.len();
        prefix.push(false);
        let zero = go(prefix, n, secret, cost);
        prefix.pop();
        prefix.push(true);
        let one = go(prefix, n, secret, cost);
        prefix.pop();
        TreeNode::ReadType {
            index: i,
            cost,
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }
    go(&mut Vec::new(), x_len, secret, read_cost)
}

/// A deterministic pseudo-random toy family. Languages, secrets, costs,
/// priors and the prover are drawn from `seed`; every verifier comes with
/// a replay simulator whose cost is that of computing the prover's answers
/// alone, and p(t) = t + b covers that cost.
pub fn toy_family(seed: u64) -> Result<ToyFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = rng.gen_range(2..=3);
    let all: Vec<Bits> = (0..1u64 << n).map(|v| bits_of(v, n)).collect();
    let mut language: BTreeSet<Bits> = all.iter().filter(|_| rng.gen_bool(0.75)).cloned().collect();
    if language.is_empty() {
        language.insert(all[rng.gen_range(0..all.len())].clone());
    }
    let secret: HashMap<Bits, bool> = all.iter().map(|x| (x.clone(), rng.gen())).collect();
    let z_len: usize = rng.gen_range(0..=1);
    let zs: Vec<Bits> = (0..1u64 << z_len).map(|v| bits_of(v, z_len)).collect();
    let mut weights = Vec::new();
    for x in &language {
        for z in &zs {
            let w: i64 = rng.gen_range(0..=3);
            if w > 0 {
                weights.push((x.clone(), z.clone(), w));
            }
        }
    }
    if weights.is_empty() {
        let x = language.iter().next().unwrap().clone();
        weights.push((x, zs[0].clone(), 1));
    }
    let total: i64 = weights.iter().map(|w| w.2).sum();
    let support = weights
        .into_iter()
        .map(|(x, z, w)| (x, z, Exact::new(w.into(), total.into())))
        .collect();
    let payoff: i64 = rng.gen_range(8..=20);
    let read_cost: u64 = rng.gen_range(1..=3);
    let ask_cost: u64 = rng.gen_range(0..=3);
    let prover_kind = match rng.gen_range(0..3) {
        0 => ToyProver::Constant,
        1 => ToyProver::RevealSecret,
        _ => ToyProver::RandomBit,
    };
    let slack: u64 = rng.gen_range(0..=2);

    let mut family = ZkFamily::from_support(
        n,
        {
            let language = language.clone();
            move |x| language.contains(x)
        },
        support,
        Labels::named(["0", "1"])?,
        ComplexityUtility::monotone(|_, _, _, _| Exact::from_i64(0)),
    )?;
    let state_secret: Vec<bool> = family
        .problem
        .state_bits
        .iter()
        .map(|x| secret[x.as_slice()])
        .collect();
    family.problem.utility = ComplexityUtility::monotone(move |s, _, a, c| {
        let right = (a.0 == 1) == state_secret[s.0];
        Exact::from_i64(if right { payoff } else { 0 }) - Exact::from_u64(c)
    });

    let (prover, per_reply): (Arc<dyn Informant>, u64) = match prover_kind {
        ToyProver::Constant => (
            Arc::new(FnInformant::new(vec!["ok".into()], |_, _| {
                Some("ok".into())
            })),
            0,
        ),
        ToyProver::RevealSecret => {
            let secret = secret.clone();
            (
                Arc::new(FnInformant::new(
                    vec!["0".into(), "1".into()],
                    move |x, _| Some(if secret[x] { "1" } else { "0" }.to_string()),
                )),
                n as u64 * read_cost,
            )
        }
        ToyProver::RandomBit => (
            Arc::new(CoinProver {
                alphabet: vec!["0".into(), "1".into()],
            }),
            0,
        ),
    };

    let alone = decide_secret(n, &secret, read_cost);
    let ask = |then_alone: bool| {
        let fallback = if then_alone {
            alone.clone()
        } else {
            TreeNode::act(0, 0)
        };
        TreeNode::Send {
            message: ASK.into(),
            cost: ask_cost,
            replies: BTreeMap::from([
                ("0".to_string(), TreeNode::act(0, 0)),
                ("1".to_string(), TreeNode::act(1, 0)),
                ("ok".to_string(), fallback.clone()),
            ]),
            silent: Some(Box::new(fallback)),
        }
    };
    let coin_guess = TreeNode::Coin {
        bits: 1,
        cost: 0,
        branches: vec![TreeNode::act(0, 0), TreeNode::act(1, 0)],
    };
    let trees = [
        ("alone", alone.clone()),
        ("ask", ask(true)),
        ("ask-or-guess", ask(false)),
        ("guess-0", TreeNode::act(0, 0)),
        ("guess-1", TreeNode::act(1, 0)),
        ("coin-guess", coin_guess),
    ];
    let round_bound = 4;
    let mut machines = Vec::new();
    for (id, root) in trees {
        let tree: Arc<dyn InteractiveMachine> = Arc::new(StrategyTree::new(root)?);
        let simulator = ReplaySimulator::new(
            tree.clone(),
            prover.clone(),
            n,
            round_bound,
            move |_, rounds, _| rounds as u64 * per_reply,
        );
        machines.push(SimulatedVerifier {
            entry: InteractiveEntry::new(id, tree),
            simulator: Arc::new(simulator),
        });
    }
    let config = ZkConfig {
        tape_len: 2,
        sim_tape_len: 4,
        round_bound,
        rule: CompositionRule::Sum,
    };
    Ok(ToyFamily {
        family,
        prover_kind,
        prover,
        machines,
        p: SpeedupFunction::Linear {
            a: 1,
            b: per_reply + slack,
        },
        config,
        read_cost,
        ask_cost,
    })
}

impl ToyFamily {
    pub fn check(&self) -> Result<VocBoundReport<Exact>> {
        check_theorem1_instance(
            &self.family,
            self.prover.as_ref(),
            &self.machines,
            &self.p,
            &self.config,
        )
    }

    /// The same family with one simulator made imprecise at the first
    /// support type: half of its tapes there cost far more than p allows.
    pub fn with_precision_violation(&self, machine: usize) -> Result<ToyFamily> {
        let mut out = self.clone();
        let slot = out
            .machines
            .get_mut(machine)
            .ok_or_else(|| Error::UnknownMachine(machine.to_string()))?;
        let t = self.family.support_types()[0];
        slot.simulator = Arc::new(Spiked {
            inner: slot.simulator.clone(),
            at: self.family.problem.type_bits[t.0].clone(),
            extra: 1_000_000,
        });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::conversation_expected_utility;
    use crate::decision::ActionIx;
    use crate::scalar::frac;

    fn tree(root: TreeNode) -> Arc<dyn InteractiveMachine> {
        Arc::new(StrategyTree::new(root).unwrap())
    }

    /// n = 1, L = {1}, one instance, no auxiliary input; action 1 pays 10.
    fn one_bit_family() -> ZkFamily<Exact> {
        ZkFamily::from_support(
            1,
            |x| x == [true],
            vec![(vec![true], vec![], frac(1, 1))],
            Labels::named(["0", "1"]).unwrap(),
            ComplexityUtility::monotone(|_, _, a, c| frac(10 * a.0 as i64 - c as i64, 1)),
        )
        .unwrap()
    }

    fn ok_prover() -> Arc<dyn Informant> {
        Arc::new(FnInformant::new(vec!["ok".into()], |_, _| {
            Some("ok".into())
        }))
    }

    fn ask_then_act(cost: u64) -> Arc<dyn InteractiveMachine> {
        tree(TreeNode::Send {
            message: "hi".into(),
            cost,
            replies: BTreeMap::from([("ok".to_string(), TreeNode::act(1, 0))]),
            silent: Some(Box::new(TreeNode::act(1, 0))),
        })
    }

    #[test]
    fn constant_protocol_passes_both_conditions() {
        let fam = one_bit_family();
        let v = ask_then_act(2);
        let sim = ReplaySimulator::new(v.clone(), ok_prover(), 1, 4, |_, _, _| 0);
        let r = check_simulator_conditions(
            &fam,
            ok_prover().as_ref(),
            &InteractiveEntry::new("v", v),
            &sim,
            &SpeedupFunction::identity(),
            &ZkConfig::new(2),
        )
        .unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.condition2[0].composite, 2);
    }

    #[test]
    fn unreachable_views_fail_condition_one() {
        let fam = one_bit_family();
        let v = ask_then_act(0);
        let bogus = View {
            type_prefix: vec![],
            history: vec![Exchange::new("hi", Some("no"))],
            random_prefix: vec![],
        };
        let sim = ConstantSimulator {
            view: bogus.clone(),
            cost: 0,
        };
        let r = check_simulator_conditions(
            &fam,
            ok_prover().as_ref(),
            &InteractiveEntry::new("v", v),
            &sim,
            &SpeedupFunction::identity(),
            &ZkConfig::new(1),
        )
        .unwrap();
        assert!(!r.condition1_holds());
        let views: Vec<&View> = r.condition1[0].mismatches.iter().map(|m| &m.view).collect();
        assert!(views.contains(&&bogus));
        assert_eq!(r.condition1[0].mismatches.len(), 2);
        assert!(!r.condition2_holds());
    }

    #[test]
    fn a_single_expensive_tape_fails_condition_two() {
        let fam = one_bit_family();
        let v = ask_then_act(1);
        let sim = Spiked {
            inner: Arc::new(ReplaySimulator::new(
                v.clone(),
                ok_prover(),
                1,
                4,
                |_, _, _| 0,
            )),
            at: vec![true],
            extra: 50,
        };
        let r = check_simulator_conditions(
            &fam,
            ok_prover().as_ref(),
            &InteractiveEntry::new("v", v),
            &sim,
            &SpeedupFunction::Linear { a: 1, b: 3 },
            &ZkConfig::new(1),
        )
        .unwrap();
        assert!(r.condition1_holds());
        let bad: Vec<&Condition2> = r.condition2.iter().filter(|c| !c.pass).collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].tape, vec![true]);
        assert_eq!(bad[0].composite, 51);
        assert_eq!(bad[0].bound, Some(4));
    }

    #[test]
    fn random_prover_views_are_matched_by_replay() {
        let fam = one_bit_family();
        let prover: Arc<dyn Informant> = Arc::new(CoinProver {
            alphabet: vec!["0".into(), "1".into()],
        });
        let v = tree(TreeNode::Coin {
            bits: 1,
            cost: 1,
            branches: vec![
                TreeNode::act(0, 0),
                TreeNode::Send {
                    message: "q".into(),
                    cost: 1,
                    replies: BTreeMap::from([
                        ("0".to_string(), TreeNode::act(0, 0)),
                        ("1".to_string(), TreeNode::act(1, 0)),
                    ]),
                    silent: Some(Box::new(TreeNode::act(0, 0))),
                },
            ],
        });
        let sim = ReplaySimulator::new(v.clone(), prover.clone(), 1, 4, |_, _, _| 0);
        let r = check_simulator_conditions(
            &fam,
            prover.as_ref(),
            &InteractiveEntry::new("v", v),
            &sim,
            &SpeedupFunction::identity(),
            &ZkConfig::new(2),
        )
        .unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.condition2.len(), 3);
    }

    #[test]
    fn identity_simulation_acts_like_the_verifier() {
        let v = ask_then_act(3);
        let real = View {
            type_prefix: vec![],
            history: vec![Exchange::new("hi", Some("ok"))],
            random_prefix: vec![],
        };
        let m = build_simulated_machine(
            v,
            Arc::new(ConstantSimulator {
                view: real.clone(),
                cost: 4,
            }),
            CompositionRule::Sum,
        );
        let run = m.run(&[true], &mut crate::tape::NoCoins).unwrap();
        assert_eq!(run.action, ActionIx(1));
        assert_eq!((run.rebound, run.composite), (3, 7));
        let off = build_simulated_machine(
            ask_then_act(0),
            Arc::new(ConstantSimulator {
                view: View {
                    history: vec![Exchange::new("bye", None)],
                    ..View::default()
                },
                cost: 0,
            }),
            CompositionRule::Sum,
        );
        assert!(matches!(
            off.run(&[true], &mut crate::tape::NoCoins),
            Err(Interrupt::Fail(Error::ViewShape(_)))
        ));
    }

    #[test]
    fn rebound_complexity_recovers_the_conversation_value() {
        let fam = one_bit_family();
        let v = ask_then_act(2);
        let sim: Arc<dyn Simulator> = Arc::new(ReplaySimulator::new(
            v.clone(),
            ok_prover(),
            1,
            4,
            |_, _, _| 5,
        ));
        let m = build_simulated_machine(v.clone(), sim, CompositionRule::Sum);
        let conv = ConversationConfig {
            tape_len: 2,
            round_bound: 4,
        };
        let with_p =
            conversation_expected_utility(&fam.problem, ok_prover().as_ref(), v.as_ref(), conv)
                .unwrap();
        let rebound = conversation_expected_utility(
            &fam.problem,
            &Silent,
            &m.charging(Charge::Rebound),
            conv,
        )
        .unwrap();
        let raw = conversation_expected_utility(&fam.problem, &Silent, &m, conv).unwrap();
        assert_eq!(rebound, with_p);
        assert_eq!(with_p, frac(8, 1));
        assert_eq!(raw, frac(3, 1));
        assert!(raw <= rebound);
    }

    #[test]
    fn family_membership_is_validated() {
        let fam = one_bit_family();
        assert!(fam.validate().is_ok());
        let outside = ZkFamily::from_support(
            1,
            |x| x == [true],
            vec![(vec![false], vec![], frac(1, 1))],
            Labels::named(["0"]).unwrap(),
            ComplexityUtility::monotone(|_, _, _, _| frac(0, 1)),
        )
        .unwrap();
        assert!(matches!(outside.validate(), Err(Error::OutsideFamily(_))));
        let mut not_monotone = one_bit_family();
        not_monotone.problem.utility = ComplexityUtility::new(|_, _, _, c| frac(c as i64, 1));
        assert!(matches!(
            not_monotone.validate(),
            Err(Error::OutsideFamily(_))
        ));
    }

    #[test]
    fn constant_prover_has_no_value_and_identity_gives_no_speedup() {
        let fam = one_bit_family();
        let v = ask_then_act(0);
        let sim = Arc::new(ReplaySimulator::new(
            v.clone(),
            ok_prover(),
            1,
            4,
            |_, _, _| 0,
        ));
        let report = check_theorem1_instance(
            &fam,
            ok_prover().as_ref(),
            &[SimulatedVerifier {
                entry: InteractiveEntry::new("v", v),
                simulator: sim,
            }],
            &SpeedupFunction::identity(),
            &ZkConfig::new(1),
        )
        .unwrap();
        assert!(report.passed());
        assert_eq!(report.voc.unwrap().value, frac(0, 1));
        assert_eq!(report.speedup.unwrap().value, frac(0, 1));
    }

    #[test]
    fn revealing_a_costly_secret_is_worth_at_most_the_speedup() {
        // Find a generated family with the revealing prover and a cheap
        // question.
        let toy = (0..200)
            .map(|s| toy_family(s).unwrap())
            .find(|t| t.prover_kind == ToyProver::RevealSecret && t.ask_cost < t.read_cost)
            .unwrap();
        let r = toy.check().unwrap();
        assert!(r.passed(), "{r:?}");
        let voc = r.voc.unwrap().value;
        let sp = r.speedup.unwrap().value;
        assert!(voc > frac(0, 1) && sp > frac(0, 1) && voc <= sp);
    }

    #[test]
    fn generated_families_satisfy_the_inequality() {
        for seed in 0..25 {
            let toy = toy_family(seed).unwrap();
            let r = toy.check().unwrap();
            assert!(r.passed(), "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn injected_imprecision_is_caught() {
        let toy = toy_family(7).unwrap().with_precision_violation(1).unwrap();
        let r = toy.check().unwrap();
        assert!(!r.passed());
        assert!(r.simulators[1].condition1_holds());
        assert!(!r.simulators[1].condition2_holds());
        assert_eq!(r.inequality_holds, None);
    }
}
