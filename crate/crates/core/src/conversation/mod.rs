//! Interactive machines conversing with an informant.
//!
//! A conversation alternates: the DM's machine either sends a message or
//! acts; each message is answered by the informant, which runs on the true
//! state. Machines are replayed from scratch on every step, so they are
//! plain functions of (input, history, coins) and need no mutable state.

mod informant;
mod transcript;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decision::{
    ActionIx, Bits, ComputationalProblem, Outcome, OutcomeDistribution, StateIx, TypeIx,
    WeightedOutcome,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tape::{enumerate_tapes, Branch, CoinSource, Interrupt, PrefixCoins, RandomTape, Role};

pub use informant::{FnInformant, Informant, Silent, TableInformant};
pub use transcript::{transcript_lines, write_transcript};

pub type Msg = String;

/// One message from the DM's machine and the informant's answer (`None`
/// when the informant stays silent).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Exchange {
    pub sent: Msg,
    pub reply: Option<Msg>,
}

impl Exchange {
    pub fn new(sent: impl Into<Msg>, reply: Option<&str>) -> Self {
        Exchange {
            sent: sent.into(),
            reply: reply.map(str::to_string),
        }
    }
}

/// What a machine has read: the type bits, the message history and its
/// random coins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct View {
    pub type_prefix: Bits,
    pub history: Vec<Exchange>,
    pub random_prefix: Bits,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    Send(Msg),
    Act(ActionIx),
}

/// A machine's next move and the complexity of everything it has done to
/// reach it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub mv: Move,
    pub complexity: u64,
    /// Length of the type prefix read so far.
    pub type_read: usize,
}

pub trait InteractiveMachine: Send + Sync + fmt::Debug {
    /// The move after `history`, in which every message already has its
    /// answer. Coins are read by index from `coins`.
    fn respond(
        &self,
        input: &[bool],
        history: &[Exchange],
        coins: &mut dyn CoinSource,
    ) -> Result<Response, Interrupt>;
}

#[derive(Debug, Clone)]
pub struct InteractiveEntry {
    pub id: String,
    pub machine: Arc<dyn InteractiveMachine>,
}

impl InteractiveEntry {
    pub fn new(id: impl Into<String>, machine: Arc<dyn InteractiveMachine>) -> Self {
        InteractiveEntry {
            id: id.into(),
            machine,
        }
    }
}

/// Tape length and round guard for a family of conversations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConversationConfig {
    pub tape_len: usize,
    pub round_bound: usize,
}

impl Default for ConversationConfig {
    fn default() -> Self {
        ConversationConfig {
            tape_len: 0,
            round_bound: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationOutcome {
    pub view: View,
    pub action: ActionIx,
    pub complexity: u64,
}

impl ConversationOutcome {
    pub fn outcome(&self) -> Outcome {
        Outcome::new(self.action, self.complexity)
    }
}

/// Remembers which coins a machine read.
struct Recorder<'c> {
    inner: &'c mut dyn CoinSource,
    seen: Vec<Option<bool>>,
}

impl CoinSource for Recorder<'_> {
    fn coin(&mut self, i: usize) -> Result<bool, Interrupt> {
        let b = self.inner.coin(i)?;
        if self.seen.len() <= i {
            self.seen.resize(i + 1, None);
        }
        self.seen[i] = Some(b);
        Ok(b)
    }
}

/// Runs one conversation to the machine's action.
pub fn converse(
    informant: &dyn Informant,
    machine: &dyn InteractiveMachine,
    state_bits: &[bool],
    type_bits: &[bool],
    informant_coins: &mut dyn CoinSource,
    machine_coins: &mut dyn CoinSource,
    round_bound: usize,
) -> Result<ConversationOutcome, Interrupt> {
    let mut history: Vec<Exchange> = Vec::new();
    let mut received: Vec<Msg> = Vec::new();
    let mut rec = Recorder {
        inner: machine_coins,
        seen: Vec::new(),
    };
    loop {
        let resp = machine.respond(type_bits, &history, &mut rec)?;
        match resp.mv {
            Move::Act(action) => {
                let random_prefix = rec.seen.iter().map(|b| b.unwrap_or(false)).collect();
                return Ok(ConversationOutcome {
                    view: View {
                        type_prefix: type_bits[..resp.type_read.min(type_bits.len())].to_vec(),
                        history,
                        random_prefix,
                    },
                    action,
                    complexity: resp.complexity,
                });
            }
            Move::Send(m) => {
                if history.len() >= round_bound {
                    return Err(Error::RoundBound(round_bound).into());
                }
                received.push(m.clone());
                let reply = informant.reply(state_bits, &received, informant_coins)?;
                if let Some(r) = &reply {
                    if !informant.alphabet().iter().any(|a| a == r) {
                        return Err(Error::Alphabet(r.clone()).into());
                    }
                }
                history.push(Exchange { sent: m, reply });
            }
        }
    }
}

/// The conversation between `machine` (input `t`, tape `tape_m`) and
/// `informant` (input `s`, tape `tape_w`).
#[allow(clippy::too_many_arguments)]
pub fn generate_view<T: Scalar>(
    problem: &ComputationalProblem<T>,
    informant: &dyn Informant,
    machine: &dyn InteractiveMachine,
    state: StateIx,
    ty: TypeIx,
    tape_w: &RandomTape,
    tape_m: &RandomTape,
    config: ConversationConfig,
) -> Result<ConversationOutcome> {
    for tape in [tape_w, tape_m] {
        if tape.bits.len() != config.tape_len {
            return Err(Error::Invalid(format!(
                "random tape has {} bits, expected {}",
                tape.bits.len(),
                config.tape_len
            )));
        }
    }
    let mut wc = PrefixCoins::new(&tape_w.bits, tape_w.role.tape());
    let mut mc = PrefixCoins::new(&tape_m.bits, tape_m.role.tape());
    converse(
        informant,
        machine,
        &problem.state_bits[state.0],
        &problem.type_bits[ty.0],
        &mut wc,
        &mut mc,
        config.round_bound,
    )
    .map_err(Interrupt::into_error)
}

/// Every conversation at one (state, type), one branch per distinct
/// tape-prefix pair actually read.
pub fn enumerate_conversations(
    informant: &dyn Informant,
    machine: &dyn InteractiveMachine,
    state_bits: &[bool],
    type_bits: &[bool],
    config: ConversationConfig,
) -> Result<Vec<Branch<ConversationOutcome>>> {
    enumerate_tapes(2, config.tape_len, |p| {
        let mut wc = PrefixCoins::new(&p[Role::Informant.tape()], Role::Informant.tape());
        let mut mc = PrefixCoins::new(&p[Role::Machine.tape()], Role::Machine.tape());
        converse(
            informant,
            machine,
            state_bits,
            type_bits,
            &mut wc,
            &mut mc,
            config.round_bound,
        )
    })
}

/// Outcome distribution of `machine` conversing with `informant`, at every
/// support point, exact over both tapes.
pub fn conversation_outcomes<T: Scalar>(
    problem: &ComputationalProblem<T>,
    informant: &dyn Informant,
    machine: &dyn InteractiveMachine,
    config: ConversationConfig,
) -> Result<OutcomeDistribution> {
    let support: Vec<(StateIx, TypeIx)> = problem.prior.iter().map(|(s, t, _)| (s, t)).collect();
    let entries = support
        .par_iter()
        .map(|&(s, t)| {
            let branches = enumerate_conversations(
                informant,
                machine,
                &problem.state_bits[s.0],
                &problem.type_bits[t.0],
                config,
            )?;
            let ws = branches
                .iter()
                .map(|b| WeightedOutcome {
                    bits: b.bits(),
                    outcome: b.value.outcome(),
                })
                .collect();
            Ok((s, t, ws))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeDistribution { entries })
}

/// E_{Pr⁺}[u′] for one machine and informant.
pub fn conversation_expected_utility<T: Scalar>(
    problem: &ComputationalProblem<T>,
    informant: &dyn Informant,
    machine: &dyn InteractiveMachine,
    config: ConversationConfig,
) -> Result<T> {
    conversation_outcomes(problem, informant, machine, config)?.expected_utility(problem)
}

/// Both terms of the value of conversation, with their maximizers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationValue<T> {
    pub value: T,
    pub with_informant: Vec<T>,
    pub with_silence: Vec<T>,
    pub best_with_informant: usize,
    pub best_with_silence: usize,
}

fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// max_M E[u′ with the informant] − max_M E[u′ with ⊥]; one machine is
/// chosen before any conversation takes place.
pub fn value_of_conversation<T: Scalar>(
    problem: &ComputationalProblem<T>,
    informant: &dyn Informant,
    machines: &[InteractiveEntry],
    config: ConversationConfig,
) -> Result<ConversationValue<T>> {
    if machines.is_empty() {
        return Err(Error::EmptyMachineSet);
    }
    let eval = |w: &dyn Informant| -> Result<Vec<T>> {
        machines
            .iter()
            .map(|m| conversation_expected_utility(problem, w, m.machine.as_ref(), config))
            .collect()
    };
    let with_informant = eval(informant)?;
    let with_silence = if informant.is_silent() {
        with_informant.clone()
    } else {
        eval(&Silent)?
    };
    let bi = argmax(&with_informant);
    let bs = argmax(&with_silence);
    Ok(ConversationValue {
        value: with_informant[bi].clone() - with_silence[bs].clone(),
        best_with_informant: bi,
        best_with_silence: bs,
        with_informant,
        with_silence,
    })
}

/// Replays `machine` along `view`. `None` when the machine would have
/// behaved differently somewhere on the way.
pub fn act_on_view(
    machine: &dyn InteractiveMachine,
    input: &[bool],
    view: &View,
) -> Result<Option<Outcome>> {
    let mut coins = PrefixCoins::new(&view.random_prefix, Role::Machine.tape());
    for k in 0..=view.history.len() {
        let resp = match machine.respond(input, &view.history[..k], &mut coins) {
            Ok(r) => r,
            Err(Interrupt::NeedCoin(_)) | Err(Interrupt::Fail(Error::OffTree)) => return Ok(None),
            Err(Interrupt::Fail(e)) => return Err(e),
        };
        match (resp.mv, view.history.get(k)) {
            (Move::Send(m), Some(ex)) if m == ex.sent => {}
            (Move::Act(a), None) => return Ok(Some(Outcome::new(a, resp.complexity))),
            _ => return Ok(None),
        }
    }
    Ok(None)
}

/// The diagnostic where the DM first picks a machine to hold the
/// conversation and then, per final view, the best machine consistent with
/// that view to act on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticularConversations<T> {
    /// max_M E[u′ with the informant].
    pub outer: T,
    /// max_M E[max_{M′ consistent with view} E[u′_{M′} | view]].
    pub inner: T,
}

pub fn value_of_particular_conversations<T: Scalar>(
    problem: &ComputationalProblem<T>,
    informant: &dyn Informant,
    machines: &[InteractiveEntry],
    config: ConversationConfig,
) -> Result<ParticularConversations<T>> {
    if machines.is_empty() {
        return Err(Error::EmptyMachineSet);
    }
    let mut outer: Option<T> = None;
    let mut inner: Option<T> = None;
    for m in machines {
        // Group every (s, t, tape) point by the view it produced.
        let mut groups: BTreeMap<View, Vec<(StateIx, TypeIx, T)>> = BTreeMap::new();
        let mut own = T::zero();
        for (s, t, mass) in problem.prior.iter() {
            let branches = enumerate_conversations(
                informant,
                m.machine.as_ref(),
                &problem.state_bits[s.0],
                &problem.type_bits[t.0],
                config,
            )?;
            for b in branches {
                let w = mass.clone() * T::half_pow(b.bits());
                let o = b.value.outcome();
                own = own + w.clone() * problem.utility.eval(s, t, o.action, o.complexity);
                groups.entry(b.value.view).or_default().push((s, t, w));
            }
        }
        let mut total = T::zero();
        for (view, points) in &groups {
            let mut best: Option<T> = None;
            for cand in machines {
                let mut sum = T::zero();
                let mut consistent = true;
                for (s, t, w) in points {
                    match act_on_view(cand.machine.as_ref(), &problem.type_bits[t.0], view)? {
                        Some(o) => {
                            sum = sum
                                + w.clone() * problem.utility.eval(*s, *t, o.action, o.complexity)
                        }
                        None => {
                            consistent = false;
                            break;
                        }
                    }
                }
                if consistent && best.as_ref().is_none_or(|b| sum > *b) {
                    best = Some(sum);
                }
            }
            total = total + best.expect("the conversing machine is consistent with its own views");
        }
        if outer.as_ref().is_none_or(|o| own > *o) {
            outer = Some(own);
        }
        if inner.as_ref().is_none_or(|i| total > *i) {
            inner = Some(total);
        }
    }
    Ok(ParticularConversations {
        outer: outer.unwrap(),
        inner: inner.unwrap(),
    })
}

/// Estimates E_{Pr⁺}[u′] by drawing `samples` tape pairs per support point
/// from a seeded generator. For tapes too long to enumerate.
pub fn sampled_expected_utility<T: Scalar>(
    problem: &ComputationalProblem<T>,
    informant: &dyn Informant,
    machine: &dyn InteractiveMachine,
    config: ConversationConfig,
    samples: usize,
    seed: u64,
) -> Result<T> {
    if samples == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = T::zero();
    for (s, t, mass) in problem.prior.iter() {
        let mut acc = T::zero();
        for _ in 0..samples {
            let tw: Bits = (0..config.tape_len).map(|_| rng.gen()).collect();
            let tm: Bits = (0..config.tape_len).map(|_| rng.gen()).collect();
            let out = generate_view(
                problem,
                informant,
                machine,
                s,
                t,
                &RandomTape::new(tw, Role::Informant),
                &RandomTape::new(tm, Role::Machine),
                config,
            )?;
            acc = acc + problem.utility.eval(s, t, out.action, out.complexity);
        }
        total = total + mass.clone() * acc / T::from_u64(samples as u64);
    }
    Ok(total)
}
