//! Value of information and value of computational information.
//!
//! All three values are built from per-cell unnormalized sums
//! Σ_{(s,t) ∈ cell} Pr(s,t)·u, which equal Pr(cell) times the conditional
//! expectation. No division is needed except to report conditional values.

use rayon::prelude::*;

use crate::decision::{
    attach_machine, ActionIx, CellLayout, ComputationalProblem, Evaluator, JointPrior, MachineIx,
    StandardProblem, StateIx,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A partition of the state carrier into nonempty disjoint cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<Vec<StateIx>>,
    cell_of: Vec<usize>,
}

impl Partition {
    pub fn new(n_states: usize, cells: Vec<Vec<StateIx>>) -> Result<Self> {
        let mut cell_of = vec![usize::MAX; n_states];
        for (c, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::InvalidPartition(format!("cell {c} is empty")));
            }
            for &s in cell {
                let slot = cell_of
                    .get_mut(s.0)
                    .ok_or_else(|| Error::InvalidPartition(format!("state {s} out of range")))?;
                if *slot != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "state {s} is in two cells"
                    )));
                }
                *slot = c;
            }
        }
        if let Some(s) = cell_of.iter().position(|&c| c == usize::MAX) {
            return Err(Error::InvalidPartition(format!("state {s} is in no cell")));
        }
        Ok(Partition { cells, cell_of })
    }

    /// Cells given by a labelling function; labels need not be contiguous.
    pub fn from_fn(n_states: usize, mut label: impl FnMut(StateIx) -> usize) -> Result<Self> {
        let mut ids = std::collections::BTreeMap::new();
        let mut cells: Vec<Vec<StateIx>> = Vec::new();
        for s in 0..n_states {
            let l = label(StateIx(s));
            let next = ids.len();
            let c = *ids.entry(l).or_insert(next);
            if c == cells.len() {
                cells.push(Vec::new());
            }
            cells[c].push(StateIx(s));
        }
        Self::new(n_states, cells)
    }

    /// The one-cell partition {S}.
    pub fn trivial(n_states: usize) -> Result<Self> {
        Self::new(n_states, vec![(0..n_states).map(StateIx).collect()])
    }

    pub fn cells(&self) -> &[Vec<StateIx>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_of(&self, s: StateIx) -> usize {
        self.cell_of[s.0]
    }

    pub fn layout(&self) -> CellLayout {
        CellLayout::new(
            self.cell_of.iter().map(|&c| c as u32).collect(),
            self.cells.len(),
        )
    }

    /// Every cell must carry positive prior mass.
    pub fn validate<T: Scalar>(&self, prior: &JointPrior<T>) -> Result<Vec<T>> {
        if prior.n_states() != self.cell_of.len() {
            return Err(Error::InvalidPartition(format!(
                "covers {} states, problem has {}",
                self.cell_of.len(),
                prior.n_states()
            )));
        }
        let mut mass = vec![T::zero(); self.cells.len()];
        for (s, _, m) in prior.iter() {
            let c = self.cell_of(s);
            mass[c] = std::mem::replace(&mut mass[c], T::zero()) + m.clone();
        }
        if let Some(c) = mass.iter().position(|m| *m <= T::zero()) {
            return Err(Error::InvalidPartition(format!(
                "cell {c} has zero prior mass"
            )));
        }
        Ok(mass)
    }

    /// Whether every cell of `self` lies inside a cell of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.cells.iter().all(|cell| {
            let c = coarser.cell_of(cell[0]);
            cell.iter().all(|&s| coarser.cell_of(s) == c)
        })
    }
}

fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |a, b| a + b)
}

/// Index and value of the largest entry; the first wins ties.
fn max_first<T: Scalar>(values: impl IntoIterator<Item = T>) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((i, v));
        }
    }
    best
}

/// Σ_cells Pr(cell)·max_a E_{Pr|cell}[u_a] − max_a E_Pr[u_a].
pub fn value_of_information<T: Scalar>(
    problem: &StandardProblem<T>,
    partition: &Partition,
) -> Result<T> {
    partition.validate(&problem.prior)?;
    let n_actions = problem.actions.len();
    if n_actions == 0 {
        return Err(Error::EmptyActions);
    }
    // sums[c][a] = Σ_{s ∈ c} Pr(s,t)·u(s,t,a)
    let mut sums = vec![vec![T::zero(); n_actions]; partition.len()];
    for (s, t, m) in problem.prior.iter() {
        let row = &mut sums[partition.cell_of(s)];
        for (a, slot) in row.iter_mut().enumerate() {
            let term = m.clone() * problem.utility.get(s, t, ActionIx(a)).clone();
            *slot = std::mem::replace(slot, T::zero()) + term;
        }
    }
    let informed = sum(sums
        .iter()
        .map(|row| max_first(row.iter().cloned()).unwrap().1));
    let uninformed = max_first((0..n_actions).map(|a| sum(sums.iter().map(|row| row[a].clone()))))
        .unwrap()
        .1;
    Ok(informed - uninformed)
}

/// Per-cell winners of the post-choice maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct InformedMachineChoice<T> {
    /// For each cell: the chosen machine and its conditional expected
    /// utility E_{Pr|cell}[u′_M].
    pub per_cell: Vec<(MachineIx, T)>,
    /// The machine chosen without the information, with its value.
    pub uninformed: (MachineIx, T),
}

fn check_subset<T: Scalar>(
    problem: &ComputationalProblem<T>,
    machines: &[MachineIx],
) -> Result<()> {
    if machines.is_empty() {
        return Err(Error::EmptyMachineSet);
    }
    for &m in machines {
        problem.machine(m)?;
    }
    Ok(())
}

/// Σ_{(s,t)} Pr(s,t)·max_M E_{Pr|q(s)}[u′_M] − max_M E_Pr[u′_M]: the DM
/// picks the best machine after learning the cell.
pub fn voci_postchoice<T: Scalar>(
    problem: &ComputationalProblem<T>,
    machines: &[MachineIx],
    partition: &Partition,
) -> Result<(T, InformedMachineChoice<T>)> {
    check_subset(problem, machines)?;
    let cell_mass = partition.validate(&problem.prior)?;
    let eval = Evaluator::new(problem, partition.layout());
    let sums = eval.cell_sums_many(machines)?;
    let mut informed = T::zero();
    let mut per_cell = Vec::with_capacity(partition.len());
    for (c, mass) in cell_mass.iter().enumerate() {
        let (i, best) = max_first(sums.iter().map(|row| row[c].clone())).unwrap();
        informed = informed + best.clone();
        per_cell.push((machines[i], best / mass.clone()));
    }
    let (i, uninformed) = max_first(sums.iter().map(|row| sum(row.iter().cloned()))).unwrap();
    let choice = InformedMachineChoice {
        per_cell,
        uninformed: (machines[i], uninformed.clone()),
    };
    Ok((informed - uninformed, choice))
}

/// max_M E_Pr[E_{Pr|q}[u′_M(q)]] − max_M E_Pr[u′_M(null cell)]: one
/// machine, chosen before the cell is known, receives the cell as input.
pub fn voci_precommit<T: Scalar>(
    problem: &ComputationalProblem<T>,
    machines: &[MachineIx],
    partition: &Partition,
) -> Result<T> {
    check_subset(problem, machines)?;
    partition.validate(&problem.prior)?;
    for &ix in machines {
        let e = problem.machine(ix)?;
        if !e.machine.is_cell_aware() {
            return Err(Error::NotCellAware(e.id.clone()));
        }
    }
    let eval = Evaluator::new(problem, partition.layout());
    let plain = Evaluator::plain(problem);
    let pairs = machines
        .par_iter()
        .map(|&ix| -> Result<(T, T)> {
            let entry = problem.machine(ix)?;
            let m = entry.machine.as_ref();
            let run = || -> Result<(T, T)> {
                let null = match m.cell_branch(None) {
                    Some(b) => plain.cell_sum_in(b.as_ref(), 0)?,
                    None => plain.cell_sums_with(|s, t| m.cell_outcome(None, s, t))?[0].clone(),
                };
                let told = if m.ignores_cell() {
                    plain.cell_sum_in(m, 0)?
                } else {
                    let mut total = T::zero();
                    for c in 0..partition.len() {
                        total = total
                            + match m.cell_branch(Some(c)) {
                                Some(b) => eval.cell_sum_in(b.as_ref(), c)?,
                                None => {
                                    let mut acc = T::zero();
                                    for &s in &partition.cells()[c] {
                                        for t in 0..problem.types.len() {
                                            let t = crate::decision::TypeIx(t);
                                            let Some(mass) = problem.prior.mass_ref(s, t) else {
                                                continue;
                                            };
                                            let o = m.cell_outcome(Some(c), s, t)?;
                                            eval.check_action(o)?;
                                            acc = acc
                                                + mass.clone()
                                                    * problem.utility.eval(
                                                        s,
                                                        t,
                                                        o.action,
                                                        o.complexity,
                                                    );
                                        }
                                    }
                                    acc
                                }
                            };
                    }
                    total
                };
                Ok((told, null))
            };
            run().map_err(|e| attach_machine(e, &entry.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let told = max_first(pairs.iter().map(|p| p.0.clone())).unwrap().1;
    let null = max_first(pairs.iter().map(|p| p.1.clone())).unwrap().1;
    Ok(told - null)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::{
        condition_prior, expected_utility_action, ComplexityUtility, Labels, Machine, MachineSet,
        Outcome, TypeIx, UtilityTable,
    };
    use crate::machine::{BeliefTable, CellBlind, CellSwitch};
    use crate::scalar::frac;
    use num::rational::BigRational;
    use proptest::prelude::*;
    use std::sync::Arc;

    type Q = BigRational;

    fn stock_bond() -> StandardProblem<Q> {
        let prior = JointPrior::from_entries(
            2,
            1,
            [
                (StateIx(0), TypeIx(0), frac(2, 3)),
                (StateIx(1), TypeIx(0), frac(1, 3)),
            ],
        )
        .unwrap();
        let table = [[3, 1], [-4, 1]];
        StandardProblem::new(
            Labels::named(["s1", "s2"]).unwrap(),
            Labels::named(["t0"]).unwrap(),
            Labels::named(["stock", "bond"]).unwrap(),
            prior,
            UtilityTable::from_fn(2, 1, 2, |s, _, a| frac(table[s.0][a.0], 1)),
        )
        .unwrap()
    }

    #[test]
    fn stock_bond_information_is_worth_four_thirds() {
        let p = stock_bond();
        let full = Partition::new(2, vec![vec![StateIx(0)], vec![StateIx(1)]]).unwrap();
        assert_eq!(value_of_information(&p, &full).unwrap(), frac(4, 3));
        assert_eq!(
            value_of_information(&p, &Partition::trivial(2).unwrap()).unwrap(),
            frac(0, 1)
        );
    }

    #[test]
    fn partitions_are_validated() {
        assert!(Partition::new(3, vec![vec![StateIx(0)], vec![StateIx(1)]]).is_err());
        assert!(Partition::new(2, vec![vec![StateIx(0), StateIx(1)], vec![StateIx(1)]]).is_err());
        assert!(Partition::new(2, vec![vec![StateIx(0), StateIx(1)], vec![]]).is_err());
        let mut p = stock_bond();
        p.prior = JointPrior::from_entries(2, 1, [(StateIx(0), TypeIx(0), frac(1, 1))]).unwrap();
        let full = Partition::new(2, vec![vec![StateIx(0)], vec![StateIx(1)]]).unwrap();
        assert!(matches!(
            value_of_information(&p, &full),
            Err(Error::InvalidPartition(_))
        ));
    }

    fn table_machine(outcomes: &[(usize, u64)], n_types: usize) -> Arc<dyn Machine> {
        let mut t = BeliefTable::new();
        for (i, &(a, c)) in outcomes.iter().enumerate() {
            t.insert(
                StateIx(i / n_types),
                TypeIx(i % n_types),
                Outcome::new(ActionIx(a), c),
            );
        }
        Arc::new(t)
    }

    /// A random computational problem with table machines.
    #[derive(Debug, Clone)]
    struct Instance {
        ns: usize,
        nt: usize,
        weights: Vec<u32>,
        utility: Vec<i64>,
        charge: i64,
        machines: Vec<Vec<(usize, u64)>>,
        labels: Vec<usize>,
        finer: Vec<usize>,
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        (1usize..=5, 1usize..=3, 1usize..=3, 1usize..=4).prop_flat_map(|(ns, nt, na, nm)| {
            (
                prop::collection::vec(0u32..5, ns * nt)
                    .prop_filter("some mass", |w| w.iter().any(|&x| x > 0)),
                prop::collection::vec(-6i64..7, ns * nt * na),
                0i64..3,
                prop::collection::vec(prop::collection::vec((0..na, 0u64..4), ns * nt), nm),
                prop::collection::vec(0usize..3, ns),
                prop::collection::vec(0usize..2, ns),
            )
                .prop_map(
                    move |(weights, utility, charge, machines, labels, finer)| Instance {
                        ns,
                        nt,
                        weights,
                        utility,
                        charge,
                        machines,
                        labels,
                        finer,
                    },
                )
        })
    }

    impl Instance {
        fn na(&self) -> usize {
            self.utility.len() / (self.ns * self.nt)
        }

        fn problem(&self) -> ComputationalProblem<Q> {
            let total: u32 = self.weights.iter().sum();
            let entries = self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0)
                .map(|(i, &w)| {
                    (
                        StateIx(i / self.nt),
                        TypeIx(i % self.nt),
                        frac(w as i64, total as i64),
                    )
                });
            let prior = JointPrior::from_entries(self.ns, self.nt, entries).unwrap();
            let (nt, na) = (self.nt, self.na());
            let u = self.utility.clone();
            let table = UtilityTable::from_fn(self.ns, nt, na, |s, t, a| {
                frac(u[(s.0 * nt + t.0) * na + a.0], 1)
            });
            let mut set = MachineSet::new();
            for (i, m) in self.machines.iter().enumerate() {
                set.push(format!("m{i}"), table_machine(m, nt)).unwrap();
            }
            ComputationalProblem::new(
                Labels::indexed("s", 0, self.ns),
                Labels::indexed("t", 0, nt),
                Labels::indexed("a", 0, na),
                prior,
                ComplexityUtility::linear_charge(table, frac(self.charge, 1)),
                set,
            )
            .unwrap()
        }

        /// Partition by `labels`, dropping it when a cell has no mass.
        fn partition(&self, p: &ComputationalProblem<Q>, labels: &[usize]) -> Option<Partition> {
            let part = Partition::from_fn(self.ns, |s| labels[s.0]).ok()?;
            part.validate(&p.prior).ok()?;
            Some(part)
        }
    }

    /// Oracle: condition the prior explicitly and evaluate every machine.
    fn oracle_postchoice(p: &ComputationalProblem<Q>, part: &Partition) -> Q {
        let eu = |prior: &JointPrior<Q>, m: MachineIx| {
            let e = p.machine(m).unwrap();
            prior.iter().fold(frac(0, 1), |acc, (s, t, w)| {
                let o = e.machine.outcome(s, t).unwrap();
                acc + w * p.utility.eval(s, t, o.action, o.complexity)
            })
        };
        let all = p.machines.all();
        let mut informed = frac(0, 1);
        for cell in part.cells() {
            let mass = p.prior.mass_where(|s| cell.contains(&s));
            let cond = condition_prior(&p.prior, cell).unwrap();
            let best = all.iter().map(|&m| eu(&cond, m)).max().unwrap();
            informed += mass * best;
        }
        informed - all.iter().map(|&m| eu(&p.prior, m)).max().unwrap()
    }

    #[test]
    fn trivial_partition_has_no_computational_value() {
        let inst = Instance {
            ns: 2,
            nt: 1,
            weights: vec![1, 1],
            utility: vec![1, 0, 0, 1],
            charge: 1,
            machines: vec![vec![(0, 0), (0, 0)], vec![(1, 0), (1, 0)]],
            labels: vec![0, 0],
            finer: vec![0, 1],
        };
        let p = inst.problem();
        let (v, _) =
            voci_postchoice(&p, &p.machines.all(), &Partition::trivial(2).unwrap()).unwrap();
        assert_eq!(v, frac(0, 1));
        let full = Partition::new(2, vec![vec![StateIx(0)], vec![StateIx(1)]]).unwrap();
        let (v, choice) = voci_postchoice(&p, &p.machines.all(), &full).unwrap();
        assert_eq!(v, frac(1, 2));
        assert_eq!(
            choice.per_cell,
            vec![(MachineIx(0), frac(1, 1)), (MachineIx(1), frac(1, 1))]
        );
        assert_eq!(
            voci_postchoice(&p, &[], &full).unwrap_err(),
            Error::EmptyMachineSet
        );
    }

    #[test]
    fn precommit_needs_cell_aware_machines() {
        let inst = Instance {
            ns: 2,
            nt: 1,
            weights: vec![1, 1],
            utility: vec![1, 0, 0, 1],
            charge: 1,
            machines: vec![vec![(0, 0), (0, 0)]],
            labels: vec![0, 1],
            finer: vec![0, 1],
        };
        let p = inst.problem();
        let full = Partition::new(2, vec![vec![StateIx(0)], vec![StateIx(1)]]).unwrap();
        assert_eq!(
            voci_precommit(&p, &[MachineIx(0)], &full).unwrap_err(),
            Error::NotCellAware("m0".into())
        );
    }

    #[test]
    fn reading_an_expensive_cell_can_lose_value() {
        // Two cells; the cell-reading machine answers perfectly but pays 3
        // per read, more than the 1/2 it gains.
        let inst = Instance {
            ns: 2,
            nt: 1,
            weights: vec![1, 1],
            utility: vec![1, 0, 0, 1],
            charge: 1,
            machines: vec![vec![(0, 0), (0, 0)], vec![(1, 0), (1, 0)]],
            labels: vec![0, 1],
            finer: vec![0, 1],
        };
        let base = inst.problem();
        let m0 = base.machines.get(MachineIx(0)).unwrap().machine.clone();
        let m1 = base.machines.get(MachineIx(1)).unwrap().machine.clone();
        let set = MachineSet::new()
            .with(
                "reader",
                Arc::new(CellSwitch {
                    per_cell: vec![m0.clone(), m1],
                    on_null: m0.clone(),
                    read_cost: 3,
                }),
            )
            .unwrap()
            .with("blind", Arc::new(CellBlind(m0)))
            .unwrap();
        let p = base.with_machines(set);
        let full = Partition::new(2, vec![vec![StateIx(0)], vec![StateIx(1)]]).unwrap();
        // reader: 1 − 3 = −2 when told; best null-cell value is 1/2.
        assert_eq!(
            voci_precommit(&p, &[MachineIx(0)], &full).unwrap(),
            frac(-2, 1) - frac(1, 2)
        );
        assert_eq!(
            voci_precommit(&p, &p.machines.all(), &full).unwrap(),
            frac(0, 1)
        );
        assert_eq!(
            voci_precommit(&p, &[MachineIx(1)], &full).unwrap(),
            frac(0, 1)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn postchoice_matches_oracle_and_dominates_precommit(inst in arb_instance()) {
            let p = inst.problem();
            let Some(part) = inst.partition(&p, &inst.labels) else { return Ok(()); };
            let all = p.machines.all();
            let (post, choice) = voci_postchoice(&p, &all, &part).unwrap();
            prop_assert_eq!(post.clone(), oracle_postchoice(&p, &part));
            prop_assert!(post >= frac(0, 1));

            // Pre-commit set: cell-blind copies of every machine plus the
            // switch built from the post-choice winners.
            let mut set = MachineSet::new();
            for (ix, e) in p.machines.iter() {
                set.push(format!("blind{}", ix.0), Arc::new(CellBlind(e.machine.clone()))).unwrap();
            }
            let winners = choice.per_cell.iter().map(|(m, _)| p.machine(*m).unwrap().machine.clone()).collect();
            let on_null = p.machine(choice.uninformed.0).unwrap().machine.clone();
            set.push("switch", Arc::new(CellSwitch { per_cell: winners, on_null, read_cost: 0 })).unwrap();
            let pre_p = p.with_machines(set);
            let pre = voci_precommit(&pre_p, &pre_p.machines.all(), &part).unwrap();
            prop_assert!(pre <= post.clone());
            prop_assert_eq!(pre, post);

            // Blind machines alone gain nothing.
            let blind: Vec<MachineIx> = (0..all.len()).map(MachineIx).collect();
            prop_assert_eq!(voci_precommit(&pre_p, &blind, &part).unwrap(), frac(0, 1));
        }

        #[test]
        fn information_value_is_nonnegative_and_monotone(inst in arb_instance()) {
            let p = inst.problem();
            let std = StandardProblem::new(
                p.states.clone(), p.types.clone(), p.actions.clone(), p.prior.clone(),
                UtilityTable::from_fn(inst.ns, inst.nt, inst.na(), |s, t, a| p.utility.eval(s, t, a, 0)),
            ).unwrap();
            let Some(coarse) = inst.partition(&p, &inst.labels) else { return Ok(()); };
            let fine_labels: Vec<usize> = inst.labels.iter().zip(&inst.finer).map(|(a, b)| a * 2 + b).collect();
            let Some(fine) = inst.partition(&p, &fine_labels) else { return Ok(()); };
            prop_assert!(fine.refines(&coarse));
            let vc = value_of_information(&std, &coarse).unwrap();
            let vf = value_of_information(&std, &fine).unwrap();
            prop_assert!(vc >= frac(0, 1));
            prop_assert!(vf >= vc.clone());

            // Oracle: per-cell action enumeration on the conditioned prior.
            let mut informed = frac(0, 1);
            for cell in coarse.cells() {
                let mass = std.prior.mass_where(|s| cell.contains(&s));
                let cond = std.with_prior(condition_prior(&std.prior, cell).unwrap());
                let best = (0..inst.na()).map(|a| expected_utility_action(&cond, ActionIx(a)).unwrap()).max().unwrap();
                informed += mass * best;
            }
            let base = (0..inst.na()).map(|a| expected_utility_action(&std, ActionIx(a)).unwrap()).max().unwrap();
            prop_assert_eq!(vc, informed - base);

            // Constant-action machines without complexity reduce to plain
            // value of information.
            let set = (0..inst.na()).fold(MachineSet::new(), |set, a| {
                set.with(format!("a{a}"), Arc::new(BeliefTable::constant(Outcome::new(ActionIx(a), 0)))).unwrap()
            });
            let cp = p.with_machines(set);
            let (v, _) = voci_postchoice(&cp, &cp.machines.all(), &coarse).unwrap();
            prop_assert_eq!(v, value_of_information(&std, &coarse).unwrap());
        }
    }
}
