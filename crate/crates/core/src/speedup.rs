//! Computational speedups and their value.
//!
//! A complexity function C′ is a p-speedup of C when C′ ≤ C ≤ p(C′)
//! pointwise. Expected utility is a sum over (machine, state, type)
//! entries, so the best admissible C′ can be chosen entry by entry.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::decision::{
    attach_machine, ActionIx, ComputationalProblem, Evaluator, Machine, MachineEntry, MachineIx,
    Outcome, OutcomeDistribution, SparseOutcomes, StateIx, TypeIx,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A monotone map p: ℕ → ℕ with p(x) ≥ x.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpeedupFunction {
    /// a·x + b, with a ≥ 1.
    Linear { a: u64, b: u64 },
    /// Σ coeffs[i]·x^i.
    Poly(Vec<u64>),
    /// p(i) = values[i]; beyond the table p grows with slope one from the
    /// last entry.
    Table(Vec<u64>),
}

impl SpeedupFunction {
    pub fn identity() -> Self {
        SpeedupFunction::Linear { a: 1, b: 0 }
    }

    /// p(x) = k·x: the machine runs k times faster.
    pub fn times(k: u64) -> Self {
        SpeedupFunction::Linear { a: k, b: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpeedupFunction::Linear { a, .. } if *a == 0 => Err(Error::InvalidSpeedup(
                "a·x + b needs a ≥ 1 to satisfy p(x) ≥ x".into(),
            )),
            SpeedupFunction::Linear { .. } => Ok(()),
            SpeedupFunction::Poly(coeffs) => {
                if coeffs.iter().skip(1).any(|&c| c >= 1) {
                    Ok(())
                } else {
                    Err(Error::InvalidSpeedup(
                        "a polynomial needs a nonconstant term to satisfy p(x) ≥ x".into(),
                    ))
                }
            }
            SpeedupFunction::Table(values) => {
                if values.is_empty() {
                    return Err(Error::InvalidSpeedup("empty table".into()));
                }
                for (x, &v) in values.iter().enumerate() {
                    if v < x as u64 {
                        return Err(Error::InvalidSpeedup(format!("p({x}) = {v} < {x}")));
                    }
                    if x > 0 && v < values[x - 1] {
                        return Err(Error::InvalidSpeedup(format!("table decreases at {x}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// p(x), saturating at `u64::MAX`.
    pub fn apply(&self, x: u64) -> u64 {
        match self {
            SpeedupFunction::Linear { a, b } => a.saturating_mul(x).saturating_add(*b),
            SpeedupFunction::Poly(coeffs) => coeffs
                .iter()
                .rev()
                .fold(0u64, |acc, &c| acc.saturating_mul(x).saturating_add(c)),
            SpeedupFunction::Table(values) => match values.get(x as usize) {
                Some(&v) => v,
                None => {
                    let last = values.len() as u64 - 1;
                    values[last as usize].saturating_add(x - last)
                }
            },
        }
    }

    /// min{c′ : p(c′) ≥ c}, the smallest complexity a p-speedup may assign
    /// where the original complexity is `c`.
    pub fn cmin(&self, c: u64) -> u64 {
        let (mut lo, mut hi) = (0u64, c);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.apply(mid) >= c {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    pub fn is_identity(&self) -> bool {
        match self {
            SpeedupFunction::Linear { a, b } => *a == 1 && *b == 0,
            SpeedupFunction::Poly(c) => {
                c.first().copied().unwrap_or(0) == 0
                    && c.get(1) == Some(&1)
                    && c.iter().skip(2).all(|&x| x == 0)
            }
            SpeedupFunction::Table(v) => v.iter().enumerate().all(|(i, &x)| x == i as u64),
        }
    }
}

impl fmt::Display for SpeedupFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        match self {
            SpeedupFunction::Linear { a, b } => write!(f, "linear:{a},{b}"),
            SpeedupFunction::Poly(c) => write!(f, "poly:{}", join(c)),
            SpeedupFunction::Table(v) => write!(f, "table:{}", join(v)),
        }
    }
}

/// Accepts `identity`, `kx` (for example `2x`), `linear:a,b`,
/// `poly:c0,c1,…` and `table:p0,p1,…`.
impl FromStr for SpeedupFunction {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::InvalidSpeedup(format!("cannot parse `{text}`"));
        let nums = |list: &str| -> Result<Vec<u64>> {
            list.split(',')
                .map(|x| x.trim().parse::<u64>().map_err(|_| bad()))
                .collect()
        };
        let p = if text == "identity" {
            SpeedupFunction::identity()
        } else if let Some(k) = text.strip_suffix('x') {
            SpeedupFunction::times(k.trim().parse().map_err(|_| bad())?)
        } else if let Some((kind, list)) = text.split_once(':') {
            let v = nums(list)?;
            match kind.trim() {
                "linear" if v.len() == 2 => SpeedupFunction::Linear { a: v[0], b: v[1] },
                "poly" => SpeedupFunction::Poly(v),
                "table" => SpeedupFunction::Table(v),
                _ => return Err(bad()),
            }
        } else {
            return Err(bad());
        };
        p.validate()?;
        Ok(p)
    }
}

/// Whether C′ ≤ C ≤ p(C′) at every key. Both assignments must be total on
/// the same domain.
pub fn check_speedup_relation<K: Ord + fmt::Debug>(
    c_prime: &BTreeMap<K, u64>,
    c: &BTreeMap<K, u64>,
    p: &SpeedupFunction,
) -> Result<bool> {
    if c_prime.len() != c.len() || c_prime.keys().zip(c.keys()).any(|(a, b)| a != b) {
        let missing = c
            .keys()
            .find(|k| !c_prime.contains_key(*k))
            .or_else(|| c_prime.keys().find(|k| !c.contains_key(*k)));
        return Err(Error::DomainMismatch(format!(
            "assignments differ at {missing:?}"
        )));
    }
    Ok(c_prime
        .iter()
        .zip(c.values())
        .all(|((_, &cp), &c)| cp <= c && c <= p.apply(cp)))
}

/// The admissible complexity maximizing u′(s, t, a, ·) where the original
/// complexity is `c`; the smallest maximizer wins ties.
pub fn best_sped_complexity<T: Scalar>(
    problem: &ComputationalProblem<T>,
    p: &SpeedupFunction,
    s: StateIx,
    t: TypeIx,
    a: ActionIx,
    c: u64,
) -> u64 {
    let lo = p.cmin(c);
    if problem.utility.is_monotone() {
        return lo;
    }
    let mut best = (lo, problem.utility.eval(s, t, a, lo));
    for cp in lo + 1..=c {
        let u = problem.utility.eval(s, t, a, cp);
        if u > best.1 {
            best = (cp, u);
        }
    }
    best.0
}

/// A machine with every complexity c replaced by `cmin(c)`. Optimal under
/// a utility that never prefers more computation.
#[derive(Debug, Clone)]
pub struct SpedUp {
    pub inner: Arc<dyn Machine>,
    pub p: SpeedupFunction,
}

impl SpedUp {
    fn map(&self, o: Outcome) -> Outcome {
        Outcome::new(o.action, self.p.cmin(o.complexity))
    }
}

impl Machine for SpedUp {
    fn outcome(&self, s: StateIx, t: TypeIx) -> Result<Outcome> {
        Ok(self.map(self.inner.outcome(s, t)?))
    }

    fn sparse(&self) -> Option<SparseOutcomes<'_>> {
        let inner = self.inner.sparse()?;
        Some(SparseOutcomes {
            default: self.map(inner.default),
            overrides: Box::new(inner.overrides.map(move |(s, t, o)| (s, t, self.map(o)))),
        })
    }
}

/// Best expected utility before and after the speedup.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupValue<T> {
    /// Sped-up optimum minus the original optimum.
    pub value: T,
    pub original: T,
    pub sped_up: T,
    pub best_original: MachineIx,
    pub best_sped_up: MachineIx,
}

fn argmax_first<T: Scalar>(values: &[T]) -> (usize, T) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    (best, values[best].clone())
}

fn speedup_value<T: Scalar>(
    subset: &[MachineIx],
    original: Vec<T>,
    sped: Vec<T>,
) -> SpeedupValue<T> {
    let (oi, ov) = argmax_first(&original);
    let (si, sv) = argmax_first(&sped);
    SpeedupValue {
        value: sv.clone() - ov.clone(),
        original: ov,
        sped_up: sv,
        best_original: subset[oi],
        best_sped_up: subset[si],
    }
}

fn sped_eu<T: Scalar>(
    eval: &Evaluator<'_, T>,
    entry: &MachineEntry,
    p: &SpeedupFunction,
) -> Result<T> {
    let problem = eval.problem();
    let sums = if problem.utility.is_monotone() {
        let sped = MachineEntry {
            id: entry.id.clone(),
            machine: Arc::new(SpedUp {
                inner: entry.machine.clone(),
                p: p.clone(),
            }),
        };
        eval.cell_sums(&sped)?
    } else {
        let m = entry.machine.as_ref();
        eval.cell_sums_with(|s, t| {
            let o = m.outcome(s, t)?;
            let c = best_sped_complexity(problem, p, s, t, o.action, o.complexity);
            Ok(Outcome::new(o.action, c))
        })
        .map_err(|e| attach_machine(e, &entry.id))?
    };
    Ok(sums.into_iter().fold(T::zero(), |a, b| a + b))
}

/// max over p-speedups C′ of the best expected utility under C′, minus the
/// best expected utility under the machines' own complexities.
pub fn value_of_p_speedup<T: Scalar>(
    problem: &ComputationalProblem<T>,
    machines: &[MachineIx],
    p: &SpeedupFunction,
) -> Result<SpeedupValue<T>> {
    p.validate()?;
    if machines.is_empty() {
        return Err(Error::EmptyMachineSet);
    }
    let eval = Evaluator::plain(problem);
    let pairs: Vec<(T, T)> = machines
        .par_iter()
        .map(|&ix| {
            let entry = problem.machine(ix)?;
            Ok((eval.expected_utility(entry)?, sped_eu(&eval, entry, p)?))
        })
        .collect::<Result<_>>()?;
    let (original, sped): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();
    Ok(speedup_value(machines, original, sped))
}

/// Applies the best admissible speedup to every branch of a distribution.
/// Expected utility is separable across random-tape branches too, so each
/// branch is optimized on its own.
pub fn speed_up_distribution<T: Scalar>(
    problem: &ComputationalProblem<T>,
    dist: &OutcomeDistribution,
    p: &SpeedupFunction,
) -> OutcomeDistribution {
    dist.map(|s, t, o| {
        Outcome::new(
            o.action,
            best_sped_complexity(problem, p, s, t, o.action, o.complexity),
        )
    })
}

/// [`value_of_p_speedup`] for machines given by outcome distributions;
/// machine indices in the result are positions in `dists`.
pub fn value_of_p_speedup_dists<T: Scalar>(
    problem: &ComputationalProblem<T>,
    dists: &[OutcomeDistribution],
    p: &SpeedupFunction,
) -> Result<SpeedupValue<T>> {
    p.validate()?;
    if dists.is_empty() {
        return Err(Error::EmptyMachineSet);
    }
    let pairs: Vec<(T, T)> = dists
        .par_iter()
        .map(|d| {
            let sped = speed_up_distribution(problem, d, p);
            Ok((
                d.expected_utility(problem)?,
                sped.expected_utility(problem)?,
            ))
        })
        .collect::<Result<_>>()?;
    let (original, sped): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();
    let ixs: Vec<MachineIx> = (0..dists.len()).map(MachineIx).collect();
    Ok(speedup_value(&ixs, original, sped))
}
