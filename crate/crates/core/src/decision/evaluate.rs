use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::decision::computational::attach_machine;
use crate::decision::{
    ComputationalProblem, Machine, MachineEntry, MachineIx, Outcome, StateIx, TypeIx,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Assignment of states to cells; a single cell covers plain expectations.
#[derive(Debug, Clone)]
pub struct CellLayout {
    cell_of: Vec<u32>,
    n_cells: usize,
}

impl CellLayout {
    pub fn single(n_states: usize) -> Self {
        CellLayout {
            cell_of: vec![0; n_states],
            n_cells: 1,
        }
    }

    pub fn new(cell_of: Vec<u32>, n_cells: usize) -> Self {
        debug_assert!(cell_of.iter().all(|&c| (c as usize) < n_cells));
        CellLayout { cell_of, n_cells }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn cell(&self, s: StateIx) -> usize {
        self.cell_of[s.0] as usize
    }
}

/// Computes per-cell unnormalized expected utilities Σ_{(s,t) ∈ cell} Pr·u′.
///
/// Sparse machines are evaluated as a cached baseline for their default
/// outcome plus corrections at their override cells, so a family of
/// machines sharing a default costs one pass over the support in total.
pub struct Evaluator<'a, T> {
    problem: &'a ComputationalProblem<T>,
    layout: CellLayout,
    baseline: Mutex<HashMap<Outcome, Arc<Vec<T>>>>,
}

impl<'a, T: Scalar> Evaluator<'a, T> {
    pub fn new(problem: &'a ComputationalProblem<T>, layout: CellLayout) -> Self {
        Evaluator {
            problem,
            layout,
            baseline: Mutex::new(HashMap::new()),
        }
    }

    pub fn plain(problem: &'a ComputationalProblem<T>) -> Self {
        Self::new(problem, CellLayout::single(problem.states.len()))
    }

    pub fn layout(&self) -> &CellLayout {
        &self.layout
    }

    pub fn problem(&self) -> &'a ComputationalProblem<T> {
        self.problem
    }

    fn term(&self, s: StateIx, t: TypeIx, mass: &T, o: Outcome) -> T {
        mass.clone() * self.problem.utility.eval(s, t, o.action, o.complexity)
    }

    fn baseline_for(&self, o: Outcome) -> Arc<Vec<T>> {
        if let Some(hit) = self.baseline.lock().unwrap().get(&o) {
            return hit.clone();
        }
        let mut sums = vec![T::zero(); self.layout.n_cells];
        for (s, t, m) in self.problem.prior.iter() {
            let c = self.layout.cell(s);
            sums[c] = std::mem::replace(&mut sums[c], T::zero()) + self.term(s, t, m, o);
        }
        let sums = Arc::new(sums);
        self.baseline.lock().unwrap().insert(o, sums.clone());
        sums
    }

    /// Per-cell sums for an arbitrary outcome rule, touching every support
    /// cell.
    pub fn cell_sums_with(
        &self,
        mut rule: impl FnMut(StateIx, TypeIx) -> Result<Outcome>,
    ) -> Result<Vec<T>> {
        let mut sums = vec![T::zero(); self.layout.n_cells];
        for (s, t, m) in self.problem.prior.iter() {
            let o = rule(s, t)?;
            self.check_action(o)?;
            let c = self.layout.cell(s);
            sums[c] = std::mem::replace(&mut sums[c], T::zero()) + self.term(s, t, m, o);
        }
        Ok(sums)
    }

    pub(crate) fn check_action(&self, o: Outcome) -> Result<()> {
        if o.action.0 >= self.problem.actions.len() {
            return Err(Error::InvalidAction {
                value: o.action.0 as i64,
                actions: self.problem.actions.len(),
            });
        }
        Ok(())
    }

    pub fn cell_sums(&self, entry: &MachineEntry) -> Result<Vec<T>> {
        let machine = entry.machine.as_ref();
        match machine.sparse() {
            Some(sparse) => {
                self.check_action(sparse.default)?;
                let mut sums = (*self.baseline_for(sparse.default)).clone();
                for (s, t, o) in sparse.overrides {
                    let Some(m) = self.problem.prior.mass_ref(s, t) else {
                        continue;
                    };
                    if o == sparse.default {
                        continue;
                    }
                    self.check_action(o)?;
                    let delta = self.term(s, t, m, o) - self.term(s, t, m, sparse.default);
                    let c = self.layout.cell(s);
                    sums[c] = std::mem::replace(&mut sums[c], T::zero()) + delta;
                }
                Ok(sums)
            }
            None => self
                .cell_sums_with(|s, t| machine.outcome(s, t))
                .map_err(|e| attach_machine(e, &entry.id)),
        }
    }

    /// The sum for a single cell only.
    pub fn cell_sum_in(&self, machine: &dyn Machine, cell: usize) -> Result<T> {
        match machine.sparse() {
            Some(sparse) => {
                self.check_action(sparse.default)?;
                let mut sum = self.baseline_for(sparse.default)[cell].clone();
                for (s, t, o) in sparse.overrides {
                    if self.layout.cell(s) != cell || o == sparse.default {
                        continue;
                    }
                    let Some(m) = self.problem.prior.mass_ref(s, t) else {
                        continue;
                    };
                    self.check_action(o)?;
                    sum = sum + self.term(s, t, m, o) - self.term(s, t, m, sparse.default);
                }
                Ok(sum)
            }
            None => {
                let mut sum = T::zero();
                for (s, t, m) in self.problem.prior.iter() {
                    if self.layout.cell(s) != cell {
                        continue;
                    }
                    let o = machine.outcome(s, t)?;
                    self.check_action(o)?;
                    sum = sum + self.term(s, t, m, o);
                }
                Ok(sum)
            }
        }
    }

    pub fn expected_utility(&self, entry: &MachineEntry) -> Result<T> {
        Ok(self
            .cell_sums(entry)?
            .into_iter()
            .fold(T::zero(), |a, b| a + b))
    }

    /// Evaluates every machine of `subset`, in order.
    pub fn cell_sums_many(&self, subset: &[MachineIx]) -> Result<Vec<Vec<T>>> {
        subset
            .par_iter()
            .map(|&ix| self.cell_sums(self.problem.machine(ix)?))
            .collect()
    }
}

/// Σ_{(s,t)} Pr(s,t)·u′(s, t, out(M,s,t), 𝒞(M,s,t)).
pub fn expected_utility_machine<T: Scalar>(
    problem: &ComputationalProblem<T>,
    machine: MachineIx,
) -> Result<T> {
    Evaluator::plain(problem).expected_utility(problem.machine(machine)?)
}

/// Maximizer of expected utility over `subset`; ties go to the machine
/// declared first.
pub fn best_machine<T: Scalar>(
    problem: &ComputationalProblem<T>,
    subset: &[MachineIx],
) -> Result<(MachineIx, T)> {
    if subset.is_empty() {
        return Err(Error::EmptyMachineSet);
    }
    let eval = Evaluator::plain(problem);
    let values = eval.cell_sums_many(subset)?;
    let mut best: Option<(MachineIx, T)> = None;
    for (&ix, sums) in subset.iter().zip(values) {
        let eu = sums.into_iter().fold(T::zero(), |a, b| a + b);
        let better = match &best {
            None => true,
            Some((bix, bv)) => eu > *bv || (eu == *bv && ix < *bix),
        };
        if better {
            best = Some((ix, eu));
        }
    }
    Ok(best.expect("nonempty subset"))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::decision::{
        ActionIx, ComplexityUtility, JointPrior, Labels, MachineSet, UtilityTable,
    };
    use crate::machine::BeliefTable;
    use crate::scalar::frac;
    use crate::Exact;

    /// A table machine without its sparse description.
    #[derive(Debug)]
    struct Dense(BeliefTable);

    impl Machine for Dense {
        fn outcome(&self, s: StateIx, t: TypeIx) -> Result<Outcome> {
            self.0.outcome(s, t)
        }
    }

    fn problem() -> ComputationalProblem<Exact> {
        let prior = JointPrior::from_entries(
            3,
            1,
            [
                (StateIx(0), TypeIx(0), frac(1, 2)),
                (StateIx(1), TypeIx(0), frac(1, 3)),
                (StateIx(2), TypeIx(0), frac(1, 6)),
            ],
        )
        .unwrap();
        let table = UtilityTable::from_fn(3, 1, 2, |s, _, a| {
            frac((s.0 as i64 + 1) * (a.0 as i64 * 2 - 1), 1)
        });
        let sparse = BeliefTable::new()
            .with_default(Outcome::new(ActionIx(0), 1))
            .with_entry(StateIx(2), TypeIx(0), Outcome::new(ActionIx(1), 3));
        let machines = MachineSet::new()
            .with("sparse", Arc::new(sparse.clone()))
            .unwrap()
            .with("dense", Arc::new(Dense(sparse)))
            .unwrap();
        ComputationalProblem::new(
            Labels::indexed("s", 0, 3),
            Labels::named(["t"]).unwrap(),
            Labels::named(["no", "yes"]).unwrap(),
            prior,
            ComplexityUtility::linear_charge(table, frac(1, 10)),
            machines,
        )
        .unwrap()
    }

    #[test]
    fn sparse_and_dense_paths_agree_per_cell() {
        let p = problem();
        let layout = CellLayout::new(vec![0, 1, 1], 2);
        let eval = Evaluator::new(&p, layout);
        let sums = eval.cell_sums_many(&p.machines.all()).unwrap();
        assert_eq!(sums[0], sums[1]);
        // cell 0: 1/2·(−1 − 1/10); cell 1: 1/3·(−2 − 1/10) + 1/6·(3 − 3/10)
        assert_eq!(sums[0][0], frac(-11, 20));
        assert_eq!(sums[0][1], frac(-7, 10) + frac(9, 20));
        let m = p.machines.get(MachineIx(0)).unwrap().machine.clone();
        for (c, sum) in sums[0].iter().enumerate() {
            assert_eq!(&eval.cell_sum_in(m.as_ref(), c).unwrap(), sum);
        }
    }

    #[test]
    fn out_of_range_actions_are_reported() {
        let p = problem();
        let bad = BeliefTable::constant(Outcome::new(ActionIx(5), 0));
        let eval = Evaluator::plain(&p);
        let err = eval
            .cell_sums(&MachineEntry {
                id: "bad".into(),
                machine: Arc::new(bad),
            })
            .unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidAction {
                value: 5,
                actions: 2
            }
        ));
    }
}
