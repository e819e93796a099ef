//! Decision-core and value-of-information results against direct
//! enumeration written independently of the library's evaluators.

use std::sync::Arc;

use compdec::decision::{
    best_machine, expected_utility_machine, ActionIx, ComplexityUtility, ComputationalProblem,
    JointPrior, Labels, MachineIx, MachineSet, Outcome, StateIx, TypeIx,
};
use compdec::info::{voci_postchoice, Partition};
use compdec::machine::BeliefTable;
use compdec::scalar::frac;
use compdec::{Exact, F64ComputationalProblem};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Instance {
    ns: usize,
    nt: usize,
    na: usize,
    /// Positive integer weights, one per (s, t).
    weights: Vec<u32>,
    /// u[(s*nt + t)*na + a], charged `charge` per step.
    utility: Vec<i32>,
    charge: u32,
    /// outcomes[m][s*nt + t] = (action, complexity)
    outcomes: Vec<Vec<(usize, u64)>>,
    labels: Vec<usize>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=5, 1usize..=3, 1usize..=3, 1usize..=4).prop_flat_map(|(ns, nt, na, nm)| {
        let cells = ns * nt;
        (
            prop::collection::vec(1u32..=5, cells),
            prop::collection::vec(-9i32..=9, cells * na),
            0u32..=2,
            prop::collection::vec(prop::collection::vec((0..na, 0u64..=4), cells), nm),
            prop::collection::vec(0usize..3, ns),
        )
            .prop_map(
                move |(weights, utility, charge, outcomes, labels)| Instance {
                    ns,
                    nt,
                    na,
                    weights,
                    utility,
                    charge,
                    outcomes,
                    labels,
                },
            )
    })
}

impl Instance {
    fn total(&self) -> u32 {
        self.weights.iter().sum()
    }

    fn u(&self, s: usize, t: usize, a: usize, c: u64) -> Exact {
        frac(i64::from(self.utility[(s * self.nt + t) * self.na + a]), 1)
            - frac(i64::from(self.charge) * c as i64, 1)
    }

    fn problem<T: compdec::Scalar>(&self) -> ComputationalProblem<T> {
        let total = i64::from(self.total());
        let entries = (0..self.ns).flat_map(|s| {
            (0..self.nt).map(move |t| {
                (
                    StateIx(s),
                    TypeIx(t),
                    T::from_ratio(i64::from(self.weights[s * self.nt + t]), total),
                )
            })
        });
        let prior =
            JointPrior::from_entries(self.ns, self.nt, entries.collect::<Vec<_>>()).unwrap();
        let (nt, na, charge) = (self.nt, self.na, self.charge);
        let table = self.utility.clone();
        let utility = ComplexityUtility::new(move |s: StateIx, t: TypeIx, a: ActionIx, c: u64| {
            T::from_i64(i64::from(table[(s.0 * nt + t.0) * na + a.0]))
                - T::from_i64(i64::from(charge) * c as i64)
        });
        let mut machines = MachineSet::new();
        for (m, outs) in self.outcomes.iter().enumerate() {
            let mut table = BeliefTable::new();
            for (i, &(a, c)) in outs.iter().enumerate() {
                table.insert(
                    StateIx(i / nt),
                    TypeIx(i % nt),
                    Outcome::new(ActionIx(a), c),
                );
            }
            machines.push(format!("m{m}"), Arc::new(table)).unwrap();
        }
        ComputationalProblem::new(
            Labels::indexed("s", 0, self.ns),
            Labels::indexed("t", 0, self.nt),
            Labels::indexed("a", 0, self.na),
            prior,
            utility,
            machines,
        )
        .unwrap()
    }

    /// Σ over the states in `keep` of weight·u′, over the total weight.
    fn eu_where(&self, m: usize, keep: impl Fn(usize) -> bool) -> Exact {
        let mut acc = frac(0, 1);
        for s in (0..self.ns).filter(|&s| keep(s)) {
            for t in 0..self.nt {
                let (a, c) = self.outcomes[m][s * self.nt + t];
                acc += frac(i64::from(self.weights[s * self.nt + t]), 1) * self.u(s, t, a, c);
            }
        }
        acc / frac(i64::from(self.total()), 1)
    }

    fn dense_labels(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        self.labels
            .iter()
            .map(|l| {
                seen.iter().position(|x| x == l).unwrap_or_else(|| {
                    seen.push(*l);
                    seen.len() - 1
                })
            })
            .collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expected_utilities_match_direct_sums(inst in instance()) {
        let p = inst.problem::<Exact>();
        for m in 0..inst.outcomes.len() {
            prop_assert_eq!(expected_utility_machine(&p, MachineIx(m)).unwrap(), inst.eu_where(m, |_| true));
        }
    }

    #[test]
    fn the_best_machine_is_the_first_maximizer(inst in instance()) {
        let p = inst.problem::<Exact>();
        let values: Vec<Exact> = (0..inst.outcomes.len()).map(|m| inst.eu_where(m, |_| true)).collect();
        let max = values.iter().max().unwrap().clone();
        let first = values.iter().position(|v| *v == max).unwrap();
        let (ix, v) = best_machine(&p, &p.machines.all()).unwrap();
        prop_assert_eq!(ix, MachineIx(first));
        prop_assert_eq!(v, max);
    }

    #[test]
    fn postchoice_voci_matches_cellwise_maximization(inst in instance()) {
        let p = inst.problem::<Exact>();
        let labels = inst.dense_labels();
        let n_cells = labels.iter().max().unwrap() + 1;
        let partition = Partition::from_fn(inst.ns, |s| labels[s.0]).unwrap();
        let nm = inst.outcomes.len();
        let mut informed = frac(0, 1);
        for c in 0..n_cells {
            informed += (0..nm).map(|m| inst.eu_where(m, |s| labels[s] == c)).max().unwrap();
        }
        let uninformed = (0..nm).map(|m| inst.eu_where(m, |_| true)).max().unwrap();
        let (v, choice) = voci_postchoice(&p, &p.machines.all(), &partition).unwrap();
        prop_assert_eq!(v.clone(), informed - uninformed);
        prop_assert!(v >= frac(0, 1));
        prop_assert_eq!(choice.per_cell.len(), n_cells);
    }

    #[test]
    fn float_scalars_track_the_exact_result(inst in instance()) {
        let exact = inst.problem::<Exact>();
        let approx: F64ComputationalProblem = inst.problem::<f64>();
        let narrow = inst.problem::<f32>();
        for m in 0..inst.outcomes.len() {
            let e = expected_utility_machine(&exact, MachineIx(m)).unwrap();
            let e = num::ToPrimitive::to_f64(&e).unwrap();
            let f = expected_utility_machine(&approx, MachineIx(m)).unwrap();
            let g = expected_utility_machine(&narrow, MachineIx(m)).unwrap();
            prop_assert!((e - f).abs() < 1e-9, "{} vs {}", e, f);
            prop_assert!((e - f64::from(g)).abs() < 1e-3, "{} vs {}", e, g);
        }
    }
}
