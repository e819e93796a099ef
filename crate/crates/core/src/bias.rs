//! Behavioral biases as optimal behavior under costly computation:
//! first impressions, belief polarization and status-quo bias.

use std::sync::Arc;

use crate::decision::{
    bits_of, render_bits, ActionIx, ComplexityUtility, ComputationalProblem, JointPrior, Labels,
    MachineSet, Outcome, OutcomeDistribution, StateIx, TypeIx, UtilityTable, WeightedOutcome,
};
use crate::error::{Error, Result};
use crate::machine::BeliefTable;
use crate::scalar::Scalar;

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

fn pow<T: Scalar>(x: &T, k: usize) -> T {
    (0..k).fold(T::one(), |acc, _| acc * x.clone())
}

/// Hidden bit b with prior 1/2; signal i equals b with probability ρ.
/// Reading a signal costs `cost`; a correct guess pays `payoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel<T> {
    pub rho: T,
    pub n: usize,
    pub cost: T,
    pub payoff: T,
}

impl<T: Scalar> SignalModel<T> {
    pub fn new(rho: T, n: usize, cost: T) -> Self {
        SignalModel {
            rho,
            n,
            cost,
            payoff: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let half = T::from_ratio(1, 2);
        if !(self.rho > half && self.rho <= T::one()) {
            return Err(invalid("signal accuracy must lie in (1/2, 1]"));
        }
        if self.n == 0 {
            return Err(invalid("at least one signal"));
        }
        if self.cost.is_negative_value() || self.payoff.is_negative_value() {
            return Err(invalid("costs and payoffs must be nonnegative"));
        }
        Ok(())
    }
}

/// Probability that the majority of the first `m` signals is right, ties
/// broken by a fair coin. Zero signals is a coin flip.
pub fn p_correct<T: Scalar>(rho: &T, m: usize) -> T {
    let half = T::from_ratio(1, 2);
    if m == 0 {
        return half;
    }
    let wrong = T::one() - rho.clone();
    let mut binom = T::one();
    let mut total = T::zero();
    for k in 0..=m {
        if k > 0 {
            binom = binom * T::from_u64((m - k + 1) as u64) / T::from_u64(k as u64);
        }
        let term = binom.clone() * pow(rho, k) * pow(&wrong, m - k);
        if 2 * k > m {
            total = total + term;
        } else if 2 * k == m {
            total = total + half.clone() * term;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstImpressions<T> {
    /// eu[m] for m = 0..=n.
    pub eu: Vec<T>,
    pub m_star: usize,
    pub eu_star: T,
}

/// eu(m) = payoff·P_correct(m) − m·c for every read count m; the
/// smallest maximizer is reported.
pub fn first_impressions_analysis<T: Scalar>(
    model: &SignalModel<T>,
) -> Result<FirstImpressions<T>> {
    model.validate()?;
    let eu: Vec<T> = (0..=model.n)
        .map(|m| {
            model.payoff.clone() * p_correct(&model.rho, m)
                - T::from_u64(m as u64) * model.cost.clone()
        })
        .collect();
    let mut m_star = 0;
    for (m, v) in eu.iter().enumerate() {
        if *v > eu[m_star] {
            m_star = m;
        }
    }
    Ok(FirstImpressions {
        eu_star: eu[m_star].clone(),
        eu,
        m_star,
    })
}

/// The first-impressions setting as a computational decision problem:
/// states are b, types are the n signals, and machine m reads the first m
/// signals (complexity m) and answers their majority, flipping a coin on a
/// tie. Returns the problem and the outcome distribution of each machine.
pub fn first_impressions_problem<T: Scalar>(
    model: &SignalModel<T>,
) -> Result<(ComputationalProblem<T>, Vec<OutcomeDistribution>)> {
    model.validate()?;
    if model.n > 16 {
        return Err(invalid("the explicit problem is limited to 16 signals"));
    }
    let n = model.n;
    let n_types = 1usize << n;
    let wrong = T::one() - model.rho.clone();
    let half = T::from_ratio(1, 2);
    let signals = |t: usize| bits_of(t as u64, n);
    let mut entries = Vec::new();
    for b in 0..2 {
        for t in 0..n_types {
            let agree = signals(t).iter().filter(|&&x| usize::from(x) == b).count();
            let mass = half.clone() * pow(&model.rho, agree) * pow(&wrong, n - agree);
            if mass != T::zero() {
                entries.push((StateIx(b), TypeIx(t), mass));
            }
        }
    }
    let prior = JointPrior::from_entries(2, n_types, entries)?;
    let payoff = model.payoff.clone();
    let table = UtilityTable::from_fn(2, n_types, 2, |s, _, a| {
        if s.0 == a.0 {
            payoff.clone()
        } else {
            T::zero()
        }
    });
    let problem = ComputationalProblem::new(
        Labels::named(["b=0", "b=1"])?,
        Labels::named((0..n_types).map(|t| render_bits(&signals(t))))?,
        Labels::named(["0", "1"])?,
        prior,
        ComplexityUtility::linear_charge(table, model.cost.clone()),
        MachineSet::new(),
    )?;
    let dists = (0..=n)
        .map(|m| {
            let entries = problem
                .prior
                .iter()
                .map(|(s, t, _)| {
                    let ones = signals(t.0)[..m].iter().filter(|&&x| x).count();
                    let c = m as u64;
                    let ws = match (2 * ones).cmp(&m) {
                        std::cmp::Ordering::Greater => vec![WeightedOutcome {
                            bits: 0,
                            outcome: Outcome::new(ActionIx(1), c),
                        }],
                        std::cmp::Ordering::Less => vec![WeightedOutcome {
                            bits: 0,
                            outcome: Outcome::new(ActionIx(0), c),
                        }],
                        std::cmp::Ordering::Equal => (0..2)
                            .map(|a| WeightedOutcome {
                                bits: 1,
                                outcome: Outcome::new(ActionIx(a), c),
                            })
                            .collect(),
                    };
                    (s, t, ws)
                })
                .collect();
            OutcomeDistribution { entries }
        })
        .collect();
    Ok((problem, dists))
}

/// A piece of evidence with its likelihood under X = 1 and under X = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceSymbol<T> {
    pub name: String,
    pub given_one: T,
    pub given_zero: T,
}

impl<T: Scalar> EvidenceSymbol<T> {
    pub fn new(name: impl Into<String>, given_one: T, given_zero: T) -> Self {
        EvidenceSymbol {
            name: name.into(),
            given_one,
            given_zero,
        }
    }

    pub fn likelihood_ratio(&self) -> T {
        self.given_one.clone() / self.given_zero.clone()
    }
}

/// A Bayesian who stops processing evidence once the posterior on X = 1
/// leaves (lower, upper).
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationAgent<T> {
    pub prior: T,
    pub lower: T,
    pub upper: T,
    /// Cost per processed symbol.
    pub cost: T,
}

impl<T: Scalar> PolarizationAgent<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior > T::zero() && self.prior < T::one()) {
            return Err(invalid("prior must lie in (0, 1)"));
        }
        if !(self.lower < self.prior && self.prior < self.upper) {
            return Err(invalid("thresholds must satisfy lower < prior < upper"));
        }
        if self.cost.is_negative_value() {
            return Err(invalid("reading cost must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Conclusion<T> {
    One,
    Zero,
    /// Evidence ran out; the final posterior on X = 1.
    Undecided(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRun<T> {
    pub conclusion: Conclusion<T>,
    /// Number of symbols processed when a threshold was crossed.
    pub stop_round: Option<usize>,
    /// Posterior on X = 1: the prior, then one entry per processed symbol.
    pub trail: Vec<T>,
    pub cost: T,
}

/// Processes `evidence` in order with odds-ratio updates, checking the
/// thresholds (strictly) after each symbol.
pub fn run_agent<T: Scalar>(
    agent: &PolarizationAgent<T>,
    evidence: &[EvidenceSymbol<T>],
) -> Result<AgentRun<T>> {
    agent.validate()?;
    let mut odds = agent.prior.clone() / (T::one() - agent.prior.clone());
    let mut trail = vec![agent.prior.clone()];
    for (i, sym) in evidence.iter().enumerate() {
        if !(sym.given_one > T::zero() && sym.given_zero > T::zero()) {
            return Err(invalid(format!(
                "symbol `{}` needs positive likelihoods",
                sym.name
            )));
        }
        odds = odds * sym.likelihood_ratio();
        let posterior = odds.clone() / (T::one() + odds.clone());
        trail.push(posterior.clone());
        let round = i + 1;
        let stop = if posterior > agent.upper {
            Some(Conclusion::One)
        } else if posterior < agent.lower {
            Some(Conclusion::Zero)
        } else {
            None
        };
        if let Some(conclusion) = stop {
            return Ok(AgentRun {
                conclusion,
                stop_round: Some(round),
                trail,
                cost: T::from_u64(round as u64) * agent.cost.clone(),
            });
        }
    }
    let last = trail.last().cloned().expect("trail holds the prior");
    Ok(AgentRun {
        conclusion: Conclusion::Undecided(last),
        stop_round: None,
        cost: T::from_u64(evidence.len() as u64) * agent.cost.clone(),
        trail,
    })
}

/// Two agents facing the same evidence.
pub fn polarization_run<T: Scalar>(
    a: &PolarizationAgent<T>,
    b: &PolarizationAgent<T>,
    evidence: &[EvidenceSymbol<T>],
) -> Result<(AgentRun<T>, AgentRun<T>)> {
    Ok((run_agent(a, evidence)?, run_agent(b, evidence)?))
}

/// One agent facing a recorded evidence stream, as a computational
/// decision problem: states are X = 0 and X = 1 under the agent's prior,
/// and machine `read-k` processes at most the first k symbols with the
/// agent's stopping rule (complexity = symbols processed), then answers
/// its conclusion, or 1 exactly when the final posterior exceeds 1/2.
/// A correct answer is worth 1; each symbol costs the agent's cost.
pub fn polarization_problem<T: Scalar>(
    agent: &PolarizationAgent<T>,
    evidence: &[EvidenceSymbol<T>],
) -> Result<ComputationalProblem<T>> {
    agent.validate()?;
    let half = T::from_ratio(1, 2);
    let mut machines = MachineSet::new();
    for k in 0..=evidence.len() {
        let run = run_agent(agent, &evidence[..k])?;
        let (action, read) = match run.conclusion {
            Conclusion::One => (1, run.stop_round.unwrap_or(k)),
            Conclusion::Zero => (0, run.stop_round.unwrap_or(k)),
            Conclusion::Undecided(p) => (usize::from(p > half), k),
        };
        let table = BeliefTable::constant(Outcome::new(ActionIx(action), read as u64));
        machines.push(format!("read-{k}"), Arc::new(table))?;
    }
    let entries = [
        (StateIx(0), TypeIx(0), T::one() - agent.prior.clone()),
        (StateIx(1), TypeIx(0), agent.prior.clone()),
    ]
    .into_iter()
    .filter(|(_, _, m)| *m != T::zero());
    let prior = JointPrior::from_entries(2, 1, entries)?;
    let table = UtilityTable::from_fn(
        2,
        1,
        2,
        |s, _, a| {
            if s.0 == a.0 {
                T::one()
            } else {
                T::zero()
            }
        },
    );
    ComputationalProblem::new(
        Labels::named(["X=0", "X=1"])?,
        Labels::named(["stream"])?,
        Labels::named(["0", "1"])?,
        prior,
        ComplexityUtility::linear_charge(table, agent.cost.clone()),
        machines,
    )
}

/// Priors 3/10 and 7/10, thresholds 1/10 and 9/10, evidence three weak
/// 0-leaning symbols (ratio 3/5) then six strong 1-leaning ones (ratio 3).
pub fn polarization_example<T: Scalar>() -> (
    PolarizationAgent<T>,
    PolarizationAgent<T>,
    Vec<EvidenceSymbol<T>>,
) {
    let agent = |prior| PolarizationAgent {
        prior,
        lower: T::from_ratio(1, 10),
        upper: T::from_ratio(9, 10),
        cost: T::zero(),
    };
    let weak0 = EvidenceSymbol::new("weak0", T::from_ratio(3, 8), T::from_ratio(5, 8));
    let strong1 = EvidenceSymbol::new("strong1", T::from_ratio(3, 4), T::from_ratio(1, 4));
    let mut evidence = vec![weak0; 3];
    evidence.extend(std::iter::repeat_n(strong1, 6));
    (
        agent(T::from_ratio(3, 10)),
        agent(T::from_ratio(7, 10)),
        evidence,
    )
}

/// k exchangeable alternatives with i.i.d. values from `values`
/// ((value, probability) pairs), a known status quo worth `status_quo`,
/// per-alternative analysis cost and a setup cost paid once any analysis
/// is done.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusQuoInstance<T> {
    pub status_quo: T,
    pub values: Vec<(T, T)>,
    pub k: usize,
    pub analysis_cost: T,
    pub setup_cost: T,
}

impl<T: Scalar> StatusQuoInstance<T> {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("empty value distribution"));
        }
        if self.values.iter().any(|(_, p)| p.is_negative_value()) {
            return Err(invalid("negative value probability"));
        }
        let total = self
            .values
            .iter()
            .fold(T::zero(), |acc, (_, p)| acc + p.clone());
        if total != T::one() {
            return Err(Error::PriorMass(total.render()));
        }
        if self.analysis_cost.is_negative_value() || self.setup_cost.is_negative_value() {
            return Err(invalid("costs must be nonnegative"));
        }
        Ok(())
    }

    /// The builtin: values 0 or 10 with equal odds, status quo 5, analysis
    /// cost 2 and setup cost k/10.
    pub fn builtin(k: usize) -> Self {
        StatusQuoInstance {
            status_quo: T::from_i64(5),
            values: vec![
                (T::from_i64(0), T::from_ratio(1, 2)),
                (T::from_i64(10), T::from_ratio(1, 2)),
            ],
            k,
            analysis_cost: T::from_i64(2),
            setup_cost: T::from_ratio(k as i64, 10),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatusQuoResult<T> {
    /// Net value of analyzing j alternatives, j = 0..=k.
    pub values: Vec<T>,
    pub analyze_count: usize,
    pub expected_value: T,
    /// Probability the optimal machine ends at the status quo.
    pub keeps_status_quo: T,
}

/// P(V ≤ v) over the declared distribution.
fn cdf<T: Scalar>(values: &[(T, T)], v: &T) -> T {
    values
        .iter()
        .filter(|(x, _)| x <= v)
        .fold(T::zero(), |acc, (_, p)| acc + p.clone())
}

/// E[max(g0, V1..Vj)] and P(all Vi ≤ g0); ties go to the status quo.
fn analyze_prefix<T: Scalar>(inst: &StatusQuoInstance<T>, j: usize) -> (T, T) {
    let g0 = &inst.status_quo;
    let keep = pow(&cdf(&inst.values, g0), j);
    let mut above: Vec<&T> = inst
        .values
        .iter()
        .map(|(v, _)| v)
        .filter(|v| *v > g0)
        .collect();
    above.sort_by(|a, b| a.partial_cmp(b).expect("values are ordered"));
    above.dedup_by(|a, b| a == b);
    let mut expected = g0.clone() * keep.clone();
    let mut below = keep.clone();
    for v in above {
        let at_most = pow(&cdf(&inst.values, v), j);
        expected = expected + v.clone() * (at_most.clone() - below);
        below = at_most;
    }
    (expected, keep)
}

/// Evaluates every "analyze the first j alternatives, then take the best
/// analyzed option or the status quo" machine, j = 0..=k. The smallest
/// optimal j is reported.
pub fn status_quo_analysis<T: Scalar>(inst: &StatusQuoInstance<T>) -> Result<StatusQuoResult<T>> {
    inst.validate()?;
    let mut values = Vec::with_capacity(inst.k + 1);
    let mut keeps = Vec::with_capacity(inst.k + 1);
    for j in 0..=inst.k {
        let (gross, keep) = analyze_prefix(inst, j);
        let mut net = gross - T::from_u64(j as u64) * inst.analysis_cost.clone();
        if j > 0 {
            net = net - inst.setup_cost.clone();
        }
        values.push(net);
        keeps.push(keep);
    }
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = j;
        }
    }
    Ok(StatusQuoResult {
        expected_value: values[best].clone(),
        keeps_status_quo: keeps[best].clone(),
        analyze_count: best,
        values,
    })
}

/// The status-quo setting as a computational decision problem: states are
/// value profiles of the k alternatives, action 0 keeps the status quo and
/// action i takes alternative i. Machine `analyze-j` has complexity j.
pub fn status_quo_problem<T: Scalar>(
    inst: &StatusQuoInstance<T>,
) -> Result<ComputationalProblem<T>> {
    inst.validate()?;
    let nv = inst.values.len();
    let n_states = nv
        .checked_pow(inst.k as u32)
        .filter(|&n| n <= 1 << 16)
        .ok_or_else(|| invalid("too many value profiles"))?;
    let profile = |s: usize| -> Vec<usize> {
        let mut rest = s;
        (0..inst.k)
            .map(|_| {
                let v = rest % nv;
                rest /= nv;
                v
            })
            .collect()
    };
    let entries = (0..n_states).map(|s| {
        let mass = profile(s)
            .iter()
            .fold(T::one(), |acc, &v| acc * inst.values[v].1.clone());
        (StateIx(s), TypeIx(0), mass)
    });
    let entries: Vec<_> = entries.filter(|(_, _, m)| *m != T::zero()).collect();
    let prior = JointPrior::from_entries(n_states, 1, entries)?;
    let values: Vec<T> = inst.values.iter().map(|(v, _)| v.clone()).collect();
    let profiles: Vec<Vec<usize>> = (0..n_states).map(profile).collect();
    let g0 = inst.status_quo.clone();
    let (a, sigma) = (inst.analysis_cost.clone(), inst.setup_cost.clone());
    let utility = {
        let profiles = profiles.clone();
        ComplexityUtility::monotone(move |s: StateIx, _, act: ActionIx, c: u64| {
            let gross = match act.0 {
                0 => g0.clone(),
                i => values[profiles[s.0][i - 1]].clone(),
            };
            let setup = if c > 0 { sigma.clone() } else { T::zero() };
            gross - a.clone() * T::from_u64(c) - setup
        })
    };
    let mut machines = MachineSet::new();
    for j in 0..=inst.k {
        let mut table = BeliefTable::new();
        for (s, p) in profiles.iter().enumerate() {
            // Best analyzed alternative, first one on ties, if it beats g0.
            let mut choice = 0;
            for i in 0..j {
                let current = if choice == 0 {
                    &inst.status_quo
                } else {
                    &inst.values[p[choice - 1]].0
                };
                if inst.values[p[i]].0 > *current {
                    choice = i + 1;
                }
            }
            table.insert(
                StateIx(s),
                TypeIx(0),
                Outcome::new(ActionIx(choice), j as u64),
            );
        }
        machines.push(format!("analyze-{j}"), Arc::new(table))?;
    }
    ComputationalProblem::new(
        Labels::indexed("profile", 0, n_states),
        Labels::indexed("t", 0, 1),
        Labels::named(
            std::iter::once("status-quo".to_string())
                .chain((1..=inst.k).map(|i| format!("alternative-{i}"))),
        )?,
        prior,
        utility,
        machines,
    )
}
