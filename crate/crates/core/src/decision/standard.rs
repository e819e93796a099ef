use crate::decision::{ActionIx, JointPrior, Labels, StateIx, TypeIx};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Total utility map S × T × A → value, stored densely.
#[derive(Debug, Clone)]
pub struct UtilityTable<T> {
    n_types: usize,
    n_actions: usize,
    values: Vec<T>,
}

impl<T: Scalar> UtilityTable<T> {
    pub fn from_fn(
        n_states: usize,
        n_types: usize,
        n_actions: usize,
        mut f: impl FnMut(StateIx, TypeIx, ActionIx) -> T,
    ) -> Self {
        let mut values = Vec::with_capacity(n_states * n_types * n_actions);
        for s in 0..n_states {
            for t in 0..n_types {
                for a in 0..n_actions {
                    values.push(f(StateIx(s), TypeIx(t), ActionIx(a)));
                }
            }
        }
        UtilityTable {
            n_types,
            n_actions,
            values,
        }
    }

    /// Builds a table from optional entries; every triple must be filled.
    pub fn from_partial(
        n_states: usize,
        n_types: usize,
        n_actions: usize,
        entries: Vec<Option<T>>,
    ) -> Result<Self> {
        if entries.len() != n_states * n_types * n_actions {
            return Err(Error::Dimension("utility table size".into()));
        }
        let mut values = Vec::with_capacity(entries.len());
        for (i, v) in entries.into_iter().enumerate() {
            let a = i % n_actions;
            let t = (i / n_actions) % n_types;
            let s = i / (n_actions * n_types);
            values.push(v.ok_or_else(|| {
                Error::Invalid(format!(
                    "utility undefined for state {s}, type {t}, action {a}"
                ))
            })?);
        }
        Ok(UtilityTable {
            n_types,
            n_actions,
            values,
        })
    }

    pub fn get(&self, s: StateIx, t: TypeIx, a: ActionIx) -> &T {
        &self.values[(s.0 * self.n_types + t.0) * self.n_actions + a.0]
    }

    fn len(&self) -> usize {
        self.values.len()
    }
}

/// A standard decision problem with types: (S, T, A, Pr, u).
#[derive(Debug, Clone)]
pub struct StandardProblem<T> {
    pub states: Labels,
    pub types: Labels,
    pub actions: Labels,
    pub prior: JointPrior<T>,
    pub utility: UtilityTable<T>,
}

impl<T: Scalar> StandardProblem<T> {
    pub fn new(
        states: Labels,
        types: Labels,
        actions: Labels,
        prior: JointPrior<T>,
        utility: UtilityTable<T>,
    ) -> Result<Self> {
        if prior.n_states() != states.len() || prior.n_types() != types.len() {
            return Err(Error::Dimension("prior does not match S × T".into()));
        }
        if utility.len() != states.len() * types.len() * actions.len() {
            return Err(Error::Dimension("utility does not cover S × T × A".into()));
        }
        Ok(StandardProblem {
            states,
            types,
            actions,
            prior,
            utility,
        })
    }

    pub fn action(&self, name: &str) -> Result<ActionIx> {
        self.actions
            .find(name)
            .map(ActionIx)
            .ok_or_else(|| Error::UnknownAction(name.to_string()))
    }

    /// Same decision problem with the prior replaced.
    pub fn with_prior(&self, prior: JointPrior<T>) -> Self {
        StandardProblem {
            prior,
            ..self.clone()
        }
    }
}

/// Σ Pr(s,t)·u(s,t,a), accumulated in state-then-type order.
pub fn expected_utility_action<T: Scalar>(
    problem: &StandardProblem<T>,
    action: ActionIx,
) -> Result<T> {
    if action.0 >= problem.actions.len() {
        return Err(Error::UnknownAction(action.0.to_string()));
    }
    Ok(problem.prior.iter().fold(T::zero(), |acc, (s, t, m)| {
        acc + m.clone() * problem.utility.get(s, t, action).clone()
    }))
}

/// Maximizing action; ties go to the smallest index.
pub fn best_action<T: Scalar>(problem: &StandardProblem<T>) -> Result<(ActionIx, T)> {
    let mut best: Option<(ActionIx, T)> = None;
    for a in 0..problem.actions.len() {
        let eu = expected_utility_action(problem, ActionIx(a))?;
        if best.as_ref().is_none_or(|(_, b)| eu > *b) {
            best = Some((ActionIx(a), eu));
        }
    }
    best.ok_or(Error::EmptyActions)
}
