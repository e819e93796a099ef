use crate::decision::{StateIx, TypeIx};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const ZERO_SLOT: u32 = u32::MAX;

/// Probability distribution on S × T.
///
/// Masses are stored densely by `(state, type)` index, but through a pool of
/// distinct values: a uniform prior over a million states keeps a single
/// mass. Entries with zero mass are outside the support.
#[derive(Debug, Clone)]
pub struct JointPrior<T> {
    n_states: usize,
    n_types: usize,
    pool: Vec<T>,
    pool_count: Vec<usize>,
    slot: Vec<u32>,
}

impl<T: Scalar> JointPrior<T> {
    /// Builds a prior from explicit entries, rejecting negative masses,
    /// duplicate cells and totals other than one.
    pub fn from_entries<I>(n_states: usize, n_types: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (StateIx, TypeIx, T)>,
    {
        let mut prior = JointPrior {
            n_states,
            n_types,
            pool: Vec::new(),
            pool_count: Vec::new(),
            slot: vec![ZERO_SLOT; n_states * n_types],
        };
        let mut seen = vec![false; n_states * n_types];
        for (s, t, mass) in entries {
            if s.0 >= n_states || t.0 >= n_types {
                return Err(Error::Dimension(format!(
                    "prior entry ({s}, {t}) outside {n_states}×{n_types}"
                )));
            }
            let idx = s.0 * n_types + t.0;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::Invalid(format!(
                    "duplicate prior entry for state {s}, type {t}"
                )));
            }
            if mass.is_negative_value() {
                return Err(Error::NegativeMass {
                    state: s.0,
                    ty: t.0,
                    mass: mass.render(),
                });
            }
            prior.set(idx, mass);
        }
        prior.check_total()?;
        Ok(prior)
    }

    /// Uniform prior over the listed cells.
    pub fn uniform<I>(n_states: usize, n_types: usize, support: I) -> Result<Self>
    where
        I: IntoIterator<Item = (StateIx, TypeIx)>,
    {
        let cells: Vec<_> = support.into_iter().collect();
        if cells.is_empty() {
            return Err(Error::PriorMass("0".into()));
        }
        let mass = T::one() / T::from_u64(cells.len() as u64);
        Self::from_entries(
            n_states,
            n_types,
            cells.into_iter().map(|(s, t)| (s, t, mass.clone())),
        )
    }

    fn set(&mut self, idx: usize, mass: T) {
        if mass.is_zero() {
            return;
        }
        // Consecutive equal masses share a pool slot.
        let pos = match self.pool.last() {
            Some(last) if *last == mass => self.pool.len() - 1,
            _ => {
                self.pool.push(mass);
                self.pool_count.push(0);
                self.pool.len() - 1
            }
        };
        self.pool_count[pos] += 1;
        self.slot[idx] = pos as u32;
    }

    fn total(&self) -> T {
        self.pool
            .iter()
            .zip(&self.pool_count)
            .fold(T::zero(), |acc, (m, &n)| {
                acc + m.clone() * T::from_u64(n as u64)
            })
    }

    fn check_total(&self) -> Result<()> {
        let total = self.total();
        if total.same(&T::one()) {
            Ok(())
        } else {
            Err(Error::PriorMass(total.render()))
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    /// Mass of `(s, t)`, `None` when outside the support.
    pub fn mass_ref(&self, s: StateIx, t: TypeIx) -> Option<&T> {
        let slot = *self.slot.get(s.0 * self.n_types + t.0)?;
        (slot != ZERO_SLOT).then(|| &self.pool[slot as usize])
    }

    pub fn mass(&self, s: StateIx, t: TypeIx) -> T {
        self.mass_ref(s, t).cloned().unwrap_or_else(T::zero)
    }

    /// Support in state-then-type index order.
    pub fn iter(&self) -> impl Iterator<Item = (StateIx, TypeIx, &T)> + '_ {
        let n_types = self.n_types;
        self.slot
            .iter()
            .enumerate()
            .filter(|(_, &slot)| slot != ZERO_SLOT)
            .map(move |(idx, &slot)| {
                (
                    StateIx(idx / n_types),
                    TypeIx(idx % n_types),
                    &self.pool[slot as usize],
                )
            })
    }

    pub fn support_len(&self) -> usize {
        self.pool_count.iter().sum()
    }

    /// Total mass of the states accepted by `in_cell`.
    pub fn mass_where(&self, mut in_cell: impl FnMut(StateIx) -> bool) -> T {
        let mut acc = T::zero();
        for (s, _, m) in self.iter() {
            if in_cell(s) {
                acc = acc + m.clone();
            }
        }
        acc
    }

    /// Marginal mass of each state.
    pub fn state_marginal(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_states];
        for (s, _, m) in self.iter() {
            out[s.0] = out[s.0].clone() + m.clone();
        }
        out
    }
}

/// Conditions `prior` on the event "the state lies in `cell`".
pub fn condition_prior<T: Scalar>(
    prior: &JointPrior<T>,
    cell: &[StateIx],
) -> Result<JointPrior<T>> {
    let mut member = vec![false; prior.n_states];
    for s in cell {
        if s.0 >= prior.n_states {
            return Err(Error::UnknownState(s.0.to_string()));
        }
        member[s.0] = true;
    }
    let cell_mass = prior.mass_where(|s| member[s.0]);
    if cell_mass.is_zero() {
        return Err(Error::NullEvent);
    }
    let entries: Vec<_> = prior
        .iter()
        .filter(|(s, _, _)| member[s.0])
        .map(|(s, t, m)| (s, t, m.clone() / cell_mass.clone()))
        .collect();
    JointPrior::from_entries(prior.n_states, prior.n_types, entries)
}
