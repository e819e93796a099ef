use crate::decision::{ComputationalProblem, Outcome, StateIx, TypeIx};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One outcome reached on a set of random tapes of total weight
/// `2^-bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedOutcome {
    pub bits: usize,
    pub outcome: Outcome,
}

/// Outcome distribution of a randomized (or interactive) machine at every
/// support point of a problem. Weights at each point sum to one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutcomeDistribution {
    pub entries: Vec<(StateIx, TypeIx, Vec<WeightedOutcome>)>,
}

impl OutcomeDistribution {
    /// A deterministic machine's outcomes.
    pub fn point(entries: impl IntoIterator<Item = (StateIx, TypeIx, Outcome)>) -> Self {
        OutcomeDistribution {
            entries: entries
                .into_iter()
                .map(|(s, t, outcome)| (s, t, vec![WeightedOutcome { bits: 0, outcome }]))
                .collect(),
        }
    }

    /// Replaces every outcome.
    pub fn map(&self, mut f: impl FnMut(StateIx, TypeIx, Outcome) -> Outcome) -> Self {
        OutcomeDistribution {
            entries: self
                .entries
                .iter()
                .map(|(s, t, ws)| {
                    let ws = ws
                        .iter()
                        .map(|w| WeightedOutcome {
                            bits: w.bits,
                            outcome: f(*s, *t, w.outcome),
                        })
                        .collect();
                    (*s, *t, ws)
                })
                .collect(),
        }
    }

    /// Σ_{(s,t)} Pr(s,t) · Σ_branches 2^-bits · u′(s, t, action, complexity).
    pub fn expected_utility<T: Scalar>(&self, problem: &ComputationalProblem<T>) -> Result<T> {
        let mut total = T::zero();
        for (s, t, ws) in &self.entries {
            let Some(mass) = problem.prior.mass_ref(*s, *t) else {
                continue;
            };
            let mut inner = T::zero();
            for w in ws {
                if w.outcome.action.0 >= problem.actions.len() {
                    return Err(Error::InvalidAction {
                        value: w.outcome.action.0 as i64,
                        actions: problem.actions.len(),
                    });
                }
                let u = problem
                    .utility
                    .eval(*s, *t, w.outcome.action, w.outcome.complexity);
                inner = inner + T::half_pow(w.bits) * u;
            }
            total = total + mass.clone() * inner;
        }
        Ok(total)
    }
}
