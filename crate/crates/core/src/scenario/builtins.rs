use std::str::FromStr;
use std::sync::Arc;

use num::{BigInt, One};

use crate::bias::{
    first_impressions_problem, polarization_example, polarization_problem, status_quo_problem,
    SignalModel, StatusQuoInstance,
};
use crate::conversation::{ConversationConfig, FnInformant, InteractiveEntry, Msg};
use crate::decision::{
    bits_of, ActionIx, Bits, ComplexityUtility, ComputationalProblem, JointPrior, Labels,
    MachineSet, Outcome, StandardProblem, StateIx, TypeIx, UtilityTable,
};
use crate::error::{Error, Result};
use crate::info::Partition;
use crate::machine::program::TRIAL_DIVISION;
use crate::machine::tree::binary_search_tree;
use crate::machine::{
    machine_from_program, BeliefTable, CellBlind, CellSwitch, MeteredProgram, StrategyTree,
    TreeNode,
};
use crate::scalar::{frac, parse_fraction, Scalar};
use crate::scenario::{
    BiasSetup, Command, ConversationSetup, RandomizedMachines, Scenario, ZkSetup,
};
use crate::speedup::SpeedupFunction;
use crate::zk::{toy_family, CompositionRule};
use crate::Exact;

pub const BUILTINS: [&str; 8] = [
    "stock-bond",
    "primality",
    "safe",
    "guess-number",
    "first-impressions",
    "polarization",
    "status-quo",
    "zk-toy",
];

pub(crate) fn builtin(name: &str, params: &[(String, String)]) -> Result<Scenario> {
    let mut p = Params::new(name, params);
    let mut scenario = match name {
        "stock-bond" => stock_bond()?,
        "primality" => primality(&mut p)?,
        "safe" => safe(&mut p)?,
        "guess-number" => guess_number(&mut p)?,
        "first-impressions" => first_impressions(&mut p)?,
        "polarization" => polarization(&mut p)?,
        "status-quo" => status_quo(&mut p)?,
        "zk-toy" => zk_toy(&mut p)?,
        _ => {
            return Err(Error::Scenario(format!(
                "unknown builtin `{name}`; builtins are {}",
                BUILTINS.join(", ")
            )))
        }
    };
    p.finish()?;
    if !p.defaults_only {
        scenario.expected = None;
    }
    scenario.params = p.echo;
    if scenario.speedup.is_none() {
        scenario.speedup = Some(SpeedupFunction::times(2));
    }
    Ok(scenario)
}

/// Typed access to `key=value` builtin parameters. Every parameter must be
/// consumed; the echo lists the effective values.
struct Params<'a> {
    builtin: &'a str,
    given: Vec<(String, String, bool)>,
    echo: Vec<(String, String)>,
    defaults_only: bool,
}

impl<'a> Params<'a> {
    fn new(builtin: &'a str, given: &[(String, String)]) -> Self {
        Params {
            builtin,
            given: given
                .iter()
                .map(|(k, v)| (k.clone(), v.clone(), false))
                .collect(),
            echo: Vec::new(),
            defaults_only: true,
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let slot = self.given.iter_mut().find(|(k, _, _)| k == key)?;
        slot.2 = true;
        Some(slot.1.clone())
    }

    fn get<V: FromStr + ToString>(&mut self, key: &str, default: V) -> Result<V> {
        let value = match self.raw(key) {
            None => default,
            Some(text) => {
                let v = text.parse::<V>().map_err(|_| {
                    Error::Scenario(format!(
                        "{}: parameter {key} has malformed value `{text}`",
                        self.builtin
                    ))
                })?;
                if v.to_string() != default.to_string() {
                    self.defaults_only = false;
                }
                v
            }
        };
        self.echo.push((key.to_string(), value.to_string()));
        Ok(value)
    }

    fn fraction(&mut self, key: &str, default: Exact) -> Result<Exact> {
        let value = match self.raw(key) {
            None => default,
            Some(text) => {
                let v = parse_fraction(&text).map_err(|e| {
                    Error::Scenario(format!("{}: parameter {key}: {e}", self.builtin))
                })?;
                if v != default {
                    self.defaults_only = false;
                }
                v
            }
        };
        self.echo.push((key.to_string(), value.render()));
        Ok(value)
    }

    fn finish(&self) -> Result<()> {
        match self.given.iter().find(|(_, _, used)| !used) {
            Some((k, _, _)) => Err(Error::Scenario(format!(
                "{}: unknown parameter `{k}`",
                self.builtin
            ))),
            None => Ok(()),
        }
    }
}

fn scenario_error(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

fn constant(action: usize, complexity: u64) -> Arc<BeliefTable> {
    Arc::new(BeliefTable::constant(Outcome::new(
        ActionIx(action),
        complexity,
    )))
}

fn stock_bond() -> Result<Scenario> {
    let states = Labels::named(["s1", "s2"])?;
    let types = Labels::named(["t"])?;
    let actions = Labels::named(["stock", "bond"])?;
    let prior = JointPrior::from_entries(
        2,
        1,
        [
            (StateIx(0), TypeIx(0), frac(2, 3)),
            (StateIx(1), TypeIx(0), frac(1, 3)),
        ],
    )?;
    let table = UtilityTable::from_fn(2, 1, 2, |s, _, a| match (s.0, a.0) {
        (0, 0) => frac(3, 1),
        (1, 0) => frac(-4, 1),
        _ => frac(1, 1),
    });
    let standard = StandardProblem::new(
        states.clone(),
        types.clone(),
        actions.clone(),
        prior.clone(),
        table.clone(),
    )?;
    let machines = MachineSet::new()
        .with("stock", constant(0, 0))?
        .with("bond", constant(1, 0))?;
    let problem = ComputationalProblem::new(
        states,
        types,
        actions,
        prior,
        ComplexityUtility::linear_charge(table, frac(0, 1)),
        machines,
    )?;
    let mut s = Scenario::empty("stock-bond", Command::Voi);
    s.partition = Some(Partition::new(2, vec![vec![StateIx(0)], vec![StateIx(1)]])?);
    s.standard = Some(standard);
    s.problem = Some(problem);
    s.expected = Some(frac(4, 3));
    Ok(s)
}

fn is_prime(n: u64) -> bool {
    n >= 2
        && (2..)
            .take_while(|d| d * d <= n)
            .all(|d| !n.is_multiple_of(d))
}

fn width_of(max: u64) -> usize {
    (64 - max.leading_zeros()) as usize
}

/// Inputs 2..=N, uniformly likely. State `good` is the world in which the
/// claimed tester is correct (probability ε); in `flawed` it answers
/// "prime" on every input. Answers are worth 10 when right, −10 when
/// wrong, 1 for a pass, minus the complexity.
fn primality(p: &mut Params) -> Result<Scenario> {
    let n: u64 = p.get("N", 4095)?;
    let deadline: u64 = p.get("deadline", 4096)?;
    let epsilon = p.fraction("epsilon", frac(1, 100))?;
    let penalty: u64 = p.get("penalty", 10)?;
    if !(3..=1 << 16).contains(&n) {
        return Err(scenario_error("primality: N must lie in 3..=65536"));
    }
    if epsilon.is_negative_value() || epsilon > frac(1, 1) {
        return Err(scenario_error("primality: epsilon must lie in [0, 1]"));
    }
    let numbers: Vec<u64> = (2..=n).collect();
    let n_types = numbers.len();
    let width = width_of(n);
    let prime: Vec<bool> = numbers.iter().map(|&x| is_prime(x)).collect();
    let uniform = frac(1, n_types as i64);
    let good = epsilon.clone() * uniform.clone();
    let flawed = (frac(1, 1) - epsilon) * uniform;
    let entries = (0..n_types).flat_map(|t| {
        [
            (StateIx(0), TypeIx(t), good.clone()),
            (StateIx(1), TypeIx(t), flawed.clone()),
        ]
    });
    let entries: Vec<_> = entries.filter(|(_, _, m)| *m != frac(0, 1)).collect();
    let prior = JointPrior::from_entries(2, n_types, entries)?;
    let states = Labels::named(["good", "flawed"])?;
    let types = Labels::named(numbers.iter().map(|x| x.to_string()))?;
    let actions = Labels::named(["0", "1", "pass"])?;
    let payoff = |t: TypeIx, a: ActionIx| -> Exact {
        match a.0 {
            2 => frac(1, 1),
            a if (a == 1) == prime[t.0] => frac(10, 1),
            _ => frac(-10, 1),
        }
    };
    let table = UtilityTable::from_fn(2, n_types, 3, |_, t, a| payoff(t, a));
    let standard = StandardProblem::new(
        states.clone(),
        types.clone(),
        actions.clone(),
        prior.clone(),
        table.clone(),
    )?;
    let inputs: Vec<Bits> = numbers.iter().map(|&x| bits_of(x, width)).collect();
    let fuel = deadline.max(1 << 16);
    let program = MeteredProgram::parse(TRIAL_DIVISION, fuel)?;
    let tester = machine_from_program(program, deadline, ActionIx(0), penalty, inputs.clone())?;
    let mut claimed = BeliefTable::new().with_default(Outcome::new(ActionIx(1), 0));
    for (t, &is_p) in prime.iter().enumerate() {
        claimed.insert(
            StateIx(0),
            TypeIx(t),
            Outcome::new(ActionIx(usize::from(is_p)), 0),
        );
    }
    let machines = MachineSet::new()
        .with("always-0", constant(0, 0))?
        .with("always-pass", constant(2, 0))?
        .with("trial-division", Arc::new(tester))?
        .with("claimed-tester", Arc::new(claimed))?;
    let problem = ComputationalProblem::new(
        states,
        types,
        actions,
        prior,
        ComplexityUtility::linear_charge(table, frac(1, 1)),
        machines,
    )?
    .with_type_bits(inputs)?;
    let mut s = Scenario::empty("primality", Command::Best);
    s.partition = Some(Partition::new(2, vec![vec![StateIx(0)], vec![StateIx(1)]])?);
    s.standard = Some(standard);
    s.problem = Some(problem);
    s.expected = Some(frac(10, 1));
    Ok(s)
}

/// Exact values of the safe scenario at any scale: the brute-force search
/// of the first 2^K combinations, the value of learning the first B − K
/// combination bits, and the value of a factor-2 speedup.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeClosedForm {
    pub eval: Exact,
    pub voci_post: Exact,
    pub speedup_2x: Exact,
}

pub fn safe_closed_form(b: u32, k: u32, payoff: &Exact) -> Result<SafeClosedForm> {
    if k >= b {
        return Err(scenario_error("safe: K must be smaller than B"));
    }
    let hit = Exact::new(BigInt::one(), BigInt::one() << (b - k) as usize);
    Ok(SafeClosedForm {
        eval: payoff.clone() * hit.clone(),
        voci_post: payoff.clone() * (Exact::one() - hit.clone()),
        speedup_2x: payoff.clone() * hit,
    })
}

/// A combination of B bits, uniformly likely; a search that tries more
/// than 2^K combinations forfeits the payoff. Machine `search-p` tries the
/// 2^K combinations whose first B − K bits equal p, in order; `search-double`
/// tries the first 2^(K+1); `cell-search` is told the first B − K bits and
/// runs the matching `search-p`.
fn safe(p: &mut Params) -> Result<Scenario> {
    let b: u32 = p.get("B", 20)?;
    let k: u32 = p.get("K", 10)?;
    let payoff = p.fraction("payoff", frac(1000, 1))?;
    if b > 22 {
        return Err(scenario_error(
            "safe: B above 22 is not enumerable; use the closed form",
        ));
    }
    if k >= b {
        return Err(scenario_error("safe: K must be smaller than B"));
    }
    let n = 1usize << b;
    let block = 1usize << k;
    let budget = block as u64;
    let prior = JointPrior::uniform(n, 1, (0..n).map(|s| (StateIx(s), TypeIx(0))))?;
    let gain = payoff.clone();
    let utility = ComplexityUtility::monotone(move |_, _, a: ActionIx, c: u64| {
        let mut u = if a.0 == 0 { gain.clone() } else { frac(0, 1) };
        if c > budget {
            u -= gain.clone();
        }
        u
    });
    let search = |start: usize, len: usize| -> BeliefTable {
        let mut table = BeliefTable::new().with_default(Outcome::new(ActionIx(1), len as u64));
        for (i, s) in (start..(start + len).min(n)).enumerate() {
            table.insert(
                StateIx(s),
                TypeIx(0),
                Outcome::new(ActionIx(0), i as u64 + 1),
            );
        }
        table
    };
    let cells = n / block;
    let per_cell: Vec<Arc<dyn crate::decision::Machine>> = (0..cells)
        .map(|c| Arc::new(search(c * block, block)) as Arc<dyn crate::decision::Machine>)
        .collect();
    let mut machines = MachineSet::new();
    for (c, m) in per_cell.iter().enumerate() {
        machines.push(format!("search-{c}"), Arc::new(CellBlind(m.clone())))?;
    }
    machines.push(
        "search-double",
        Arc::new(CellBlind(Arc::new(search(0, 2 * block)))),
    )?;
    machines.push(
        "cell-search",
        Arc::new(CellSwitch {
            on_null: per_cell[0].clone(),
            per_cell,
            read_cost: 0,
        }),
    )?;
    let problem = ComputationalProblem::new(
        Labels::indexed("combo-", 0, n),
        Labels::named(["t"])?,
        Labels::named(["open", "fail"])?,
        prior,
        utility,
        machines,
    )?;
    let mut s = Scenario::empty("safe", Command::Voci);
    s.partition = Some(Partition::from_fn(n, |st| st.0 >> k)?);
    s.problem = Some(problem);
    s.expected = Some(safe_closed_form(b, k, &payoff)?.voci_post);
    Ok(s)
}

fn decode(bits: &[bool]) -> i64 {
    bits.iter().fold(0, |acc, &b| 2 * acc + i64::from(b))
}

/// The informant's answer to the last `x>k?` question about the number
/// encoded in `state`.
fn truthful(state: &[bool], received: &[Msg]) -> Option<Msg> {
    let q = received.last()?;
    let k: i64 = q.strip_prefix("x>")?.strip_suffix('?')?.parse().ok()?;
    Some(if decode(state) > k { "yes" } else { "no" }.to_string())
}

/// A number in 1..=N chosen uniformly; guessing it pays `payoff`, each
/// question costs `cost`. The informant answers `x>k?` truthfully.
fn guess_number(p: &mut Params) -> Result<Scenario> {
    let n: i64 = p.get("N", 100)?;
    let rounds: usize = p.get("rounds", 7)?;
    let cost = p.fraction("cost", frac(0, 1))?;
    let payoff = p.fraction("payoff", frac(100, 1))?;
    if !(1..=4096).contains(&n) {
        return Err(scenario_error("guess-number: N must lie in 1..=4096"));
    }
    if cost.is_negative_value() {
        return Err(scenario_error("guess-number: cost must be nonnegative"));
    }
    let size = n as usize;
    let width = width_of(n as u64);
    let prior = JointPrior::uniform(size, 1, (0..size).map(|s| (StateIx(s), TypeIx(0))))?;
    let table = UtilityTable::from_fn(size, 1, size, |s, _, a| {
        if s.0 == a.0 {
            payoff.clone()
        } else {
            frac(0, 1)
        }
    });
    let problem = ComputationalProblem::new(
        Labels::indexed("x=", 1, size),
        Labels::named(["t"])?,
        Labels::indexed("guess-", 1, size),
        prior,
        ComplexityUtility::linear_charge(table, cost.clone()),
        MachineSet::new(),
    )?
    .with_state_bits((1..=n).map(|x| bits_of(x as u64, width)).collect())?;
    // Each question is one unit of complexity, charged at `cost`.
    let mut machines = vec![InteractiveEntry::new(
        "binary-search",
        Arc::new(binary_search_tree(1, n, 1, Some(rounds))?),
    )];
    for x in 1..=n {
        machines.push(InteractiveEntry::new(
            format!("guess-{x}"),
            Arc::new(StrategyTree::new(TreeNode::act((x - 1) as usize, 0))?),
        ));
    }
    let informant = FnInformant::new(vec!["yes".into(), "no".into()], truthful);
    let mut s = Scenario::empty("guess-number", Command::Voc);
    s.problem = Some(problem);
    s.conversation = Some(ConversationSetup {
        informant: Arc::new(informant),
        machines,
        config: ConversationConfig {
            tape_len: 0,
            round_bound: rounds,
        },
    });
    s.expected = Some(payoff.clone() - payoff / frac(n, 1));
    Ok(s)
}

fn first_impressions(p: &mut Params) -> Result<Scenario> {
    let rho = p.fraction("rho", frac(3, 4))?;
    let cost = p.fraction("cost", frac(0, 1))?;
    let n: usize = p.get("n", 5)?;
    let payoff = p.fraction("payoff", frac(1, 1))?;
    let mut model = SignalModel::new(rho, n, cost);
    model.payoff = payoff;
    model.validate()?;
    let mut s = Scenario::empty("first-impressions", Command::Bias);
    if n <= 16 {
        let (problem, dists) = first_impressions_problem(&model)?;
        s.problem = Some(problem);
        s.randomized = Some(RandomizedMachines {
            ids: (0..=n).map(|m| format!("read-{m}")).collect(),
            dists,
        });
    }
    s.bias = Some(BiasSetup::FirstImpressions(model));
    s.expected = Some(frac(459, 512));
    Ok(s)
}

/// The recorded evidence stream seen by a skeptic (prior 3/10) and a
/// believer (prior 7/10). The problem form is that of `agent`.
fn polarization(p: &mut Params) -> Result<Scenario> {
    let agent: String = p.get("agent", "a".to_string())?;
    let cost = p.fraction("cost", frac(0, 1))?;
    let (mut a, mut b, evidence) = polarization_example::<Exact>();
    a.cost = cost.clone();
    b.cost = cost;
    let chosen = match agent.as_str() {
        "a" => &a,
        "b" => &b,
        other => {
            return Err(scenario_error(format!(
                "polarization: agent must be a or b, not `{other}`"
            )))
        }
    };
    let mut s = Scenario::empty("polarization", Command::Bias);
    s.problem = Some(polarization_problem(chosen, &evidence)?);
    s.bias = Some(BiasSetup::Polarization {
        agents: [a, b],
        evidence,
    });
    s.expected = Some(frac(81, 956));
    Ok(s)
}

/// Values 0 or 10 with equal odds against a status quo worth 5; the setup
/// cost σ defaults to k/10, so it grows with the number of alternatives.
fn status_quo(p: &mut Params) -> Result<Scenario> {
    let k: usize = p.get("k", 3)?;
    let base = StatusQuoInstance::<Exact>::builtin(k);
    let inst = StatusQuoInstance {
        status_quo: p.fraction("status_quo", base.status_quo)?,
        analysis_cost: p.fraction("analysis_cost", base.analysis_cost)?,
        setup_cost: p.fraction("setup_cost", base.setup_cost)?,
        ..base
    };
    inst.validate()?;
    let mut s = Scenario::empty("status-quo", Command::Bias);
    if k <= 16 {
        s.problem = Some(status_quo_problem(&inst)?);
    }
    s.bias = Some(BiasSetup::StatusQuo(inst));
    s.expected = Some(frac(1, 2));
    Ok(s)
}

fn zk_toy(p: &mut Params) -> Result<Scenario> {
    let seed: u64 = p.get("seed", 0)?;
    let count: u64 = p.get("count", 1)?;
    let inject: String = p.get("inject", "none".to_string())?;
    let rule: String = p.get("rule", "sum".to_string())?;
    let inject = match inject.as_str() {
        "none" => None,
        v => Some(v.parse::<usize>().map_err(|_| {
            scenario_error(format!(
                "zk-toy: inject must be a verifier index, not `{v}`"
            ))
        })?),
    };
    let rule = match rule.as_str() {
        "sum" => CompositionRule::Sum,
        "max" => CompositionRule::Max,
        other => {
            return Err(scenario_error(format!(
                "zk-toy: rule must be sum or max, not `{other}`"
            )))
        }
    };
    if count == 0 {
        return Err(scenario_error("zk-toy: count must be positive"));
    }
    let toy = toy_family(seed)?;
    if let Some(m) = inject {
        if m >= toy.machines.len() {
            return Err(scenario_error(format!(
                "zk-toy: inject index {m} out of range (family has {} verifiers)",
                toy.machines.len()
            )));
        }
    }
    let mut s = Scenario::empty("zk-toy", Command::ZkCheck);
    s.conversation = Some(ConversationSetup {
        informant: toy.prover.clone(),
        machines: toy.machines.iter().map(|m| m.entry.clone()).collect(),
        config: ConversationConfig {
            tape_len: toy.config.tape_len,
            round_bound: toy.config.round_bound,
        },
    });
    s.problem = Some(toy.family.problem.clone());
    s.speedup = Some(toy.p.clone());
    s.zk = Some(ZkSetup {
        seed,
        count,
        inject,
        rule,
    });
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::{best_machine, expected_utility_machine};

    fn load(name: &str) -> Scenario {
        builtin(name, &[]).unwrap()
    }

    #[test]
    fn stock_bond_has_the_recorded_shape() {
        let s = load("stock-bond");
        let p = s.problem.unwrap();
        assert_eq!((p.states.len(), p.types.len(), p.actions.len()), (2, 1, 2));
        assert_eq!(p.prior.mass(StateIx(0), TypeIx(0)), frac(2, 3));
        assert_eq!(
            expected_utility_machine(&p, p.machines.find("stock").unwrap()).unwrap(),
            frac(2, 3)
        );
    }

    #[test]
    fn unknown_builtins_list_the_corpus() {
        let err = builtin("stock", &[]).unwrap_err().to_string();
        for name in BUILTINS {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn unknown_and_malformed_parameters_are_rejected() {
        let bad = |k: &str, v: &str| builtin("safe", &[(k.into(), v.into())]).is_err();
        assert!(bad("B2", "3"));
        assert!(bad("B", "x"));
        assert!(bad("payoff", "0.5"));
        assert!(bad("K", "20"));
    }

    #[test]
    fn non_default_parameters_drop_the_recorded_value() {
        let s = builtin(
            "safe",
            &[("B".into(), "8".into()), ("K".into(), "4".into())],
        )
        .unwrap();
        assert!(s.expected.is_none());
        let s = builtin("safe", &[("B".into(), "20".into())]).unwrap();
        assert_eq!(s.expected, Some(frac(127875, 128)));
    }

    #[test]
    fn primality_testers_are_judged_against_true_primality() {
        let s = builtin("primality", &[("N".into(), "200".into())]).unwrap();
        let p = s.problem.unwrap();
        // 46 primes in 2..=200.
        let always0 = expected_utility_machine(&p, MachineIx(0)).unwrap();
        assert_eq!(always0, frac(10 * (153 - 46), 199));
        let (best, v) = best_machine(&p, &p.machines.all()).unwrap();
        assert_eq!(p.machine(best).unwrap().id, "trial-division");
        assert_eq!(v, frac(10, 1));
    }

    use crate::decision::MachineIx;

    #[test]
    fn a_tight_deadline_penalizes_slow_inputs() {
        let s = builtin(
            "primality",
            &[("N".into(), "200".into()), ("deadline".into(), "0".into())],
        )
        .unwrap();
        let p = s.problem.unwrap();
        let v = expected_utility_machine(&p, p.machines.find("trial-division").unwrap()).unwrap();
        assert_eq!(v, frac(0, 1));
    }

    #[test]
    fn safe_closed_form_reproduces_the_large_instance() {
        let f = safe_closed_form(40, 20, &frac(1_000_000, 1)).unwrap();
        assert_eq!(f.eval, frac(1_000_000, 1 << 20));
        assert_eq!(f.voci_post, frac(1_000_000, 1) - frac(1_000_000, 1 << 20));
    }

    #[test]
    fn guess_number_informant_is_truthful() {
        let s = load("guess-number");
        let p = s.problem.unwrap();
        assert_eq!(p.states.len(), 100);
        let bits = &p.state_bits[41];
        assert_eq!(decode(bits), 42);
        assert_eq!(truthful(bits, &["x>41?".into()]).as_deref(), Some("yes"));
        assert_eq!(truthful(bits, &["x>42?".into()]).as_deref(), Some("no"));
        assert_eq!(truthful(bits, &["hello".into()]), None);
    }
}
