//! Concrete machines: belief tables, metered programs and strategy trees.

pub mod program;
pub mod tree;
pub mod vm;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::decision::{Machine, Outcome, SparseOutcomes, StateIx, TypeIx};
use crate::error::{Error, Result};

pub use program::{machine_from_program, ProgramAgent, ProgramInformant, ProgramMachine};
pub use tree::{strategy_tree_step, StrategyTree, TreeNode};
pub use vm::{
    vm_execute, vm_execute_with_tape, ExecutionResult, Instr, MeteredProgram, Program, VmOutcome,
};

/// The DM's subjective beliefs about a machine: output and complexity per
/// (state, type).
///
/// Entries not listed fall back to the delegate machine, then to the
/// default outcome; with neither, a lookup is a missing-entry error.
#[derive(Debug, Clone, Default)]
pub struct BeliefTable {
    entries: BTreeMap<(StateIx, TypeIx), Outcome>,
    default: Option<Outcome>,
    delegate: Option<Arc<dyn Machine>>,
}

impl BeliefTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The same outcome everywhere.
    pub fn constant(outcome: Outcome) -> Self {
        BeliefTable {
            default: Some(outcome),
            ..Self::default()
        }
    }

    pub fn with_default(mut self, outcome: Outcome) -> Self {
        self.default = Some(outcome);
        self
    }

    pub fn with_delegate(mut self, machine: Arc<dyn Machine>) -> Self {
        self.delegate = Some(machine);
        self
    }

    pub fn insert(&mut self, s: StateIx, t: TypeIx, outcome: Outcome) -> &mut Self {
        self.entries.insert((s, t), outcome);
        self
    }

    pub fn with_entry(mut self, s: StateIx, t: TypeIx, outcome: Outcome) -> Self {
        self.insert(s, t, outcome);
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Runs `machine` on every (state, type) and records the results.
    pub fn tabulate(machine: &dyn Machine, n_states: usize, n_types: usize) -> Result<Self> {
        let mut table = BeliefTable::new();
        for s in 0..n_states {
            for t in 0..n_types {
                let (s, t) = (StateIx(s), TypeIx(t));
                table.insert(s, t, machine.outcome(s, t)?);
            }
        }
        Ok(table)
    }

    /// Table entries that the delegate would compute differently.
    pub fn check_delegate(&self) -> Result<Vec<(StateIx, TypeIx)>> {
        let Some(delegate) = &self.delegate else {
            return Ok(Vec::new());
        };
        let mut conflicts = Vec::new();
        for (&(s, t), o) in &self.entries {
            if delegate.outcome(s, t)? != *o {
                conflicts.push((s, t));
            }
        }
        Ok(conflicts)
    }
}

impl Machine for BeliefTable {
    fn outcome(&self, s: StateIx, t: TypeIx) -> Result<Outcome> {
        if let Some(o) = self.entries.get(&(s, t)) {
            return Ok(*o);
        }
        if let Some(d) = &self.delegate {
            return d.outcome(s, t);
        }
        self.default.ok_or(Error::MissingEntry {
            state: s.0,
            ty: t.0,
        })
    }

    fn sparse(&self) -> Option<SparseOutcomes<'_>> {
        if self.delegate.is_some() {
            return None;
        }
        let default = self.default?;
        Some(SparseOutcomes {
            default,
            overrides: Box::new(self.entries.iter().map(|(&(s, t), &o)| (s, t, o))),
        })
    }
}

/// Adds a fixed complexity to every outcome of another machine.
#[derive(Debug, Clone)]
pub struct Charged {
    pub inner: Arc<dyn Machine>,
    pub extra: u64,
}

impl Charged {
    fn bump(&self, o: Outcome) -> Outcome {
        Outcome::new(o.action, o.complexity.saturating_add(self.extra))
    }
}

impl Machine for Charged {
    fn outcome(&self, s: StateIx, t: TypeIx) -> Result<Outcome> {
        Ok(self.bump(self.inner.outcome(s, t)?))
    }

    fn sparse(&self) -> Option<SparseOutcomes<'_>> {
        let inner = self.inner.sparse()?;
        Some(SparseOutcomes {
            default: self.bump(inner.default),
            overrides: Box::new(inner.overrides.map(move |(s, t, o)| (s, t, self.bump(o)))),
        })
    }
}

/// A cell-aware machine that runs a different sub-machine per partition
/// cell, paying `read_cost` for reading the cell. With the null cell (and
/// when used as a plain machine) it runs `on_null`.
#[derive(Debug, Clone)]
pub struct CellSwitch {
    pub per_cell: Vec<Arc<dyn Machine>>,
    pub on_null: Arc<dyn Machine>,
    pub read_cost: u64,
}

impl CellSwitch {
    /// The sub-machine used for `cell`, with the read cost attached.
    pub fn branch(&self, cell: Option<usize>) -> Result<Arc<dyn Machine>> {
        match cell {
            None => Ok(self.on_null.clone()),
            Some(c) => {
                let inner = self
                    .per_cell
                    .get(c)
                    .ok_or_else(|| Error::InvalidPartition(format!("no branch for cell {c}")))?
                    .clone();
                if self.read_cost == 0 {
                    Ok(inner)
                } else {
                    Ok(Arc::new(Charged {
                        inner,
                        extra: self.read_cost,
                    }))
                }
            }
        }
    }
}

impl Machine for CellSwitch {
    fn outcome(&self, s: StateIx, t: TypeIx) -> Result<Outcome> {
        self.on_null.outcome(s, t)
    }

    fn sparse(&self) -> Option<SparseOutcomes<'_>> {
        self.on_null.sparse()
    }

    fn is_cell_aware(&self) -> bool {
        true
    }

    fn cell_outcome(&self, cell: Option<usize>, s: StateIx, t: TypeIx) -> Result<Outcome> {
        self.branch(cell)?.outcome(s, t)
    }

    fn cell_branch(&self, cell: Option<usize>) -> Option<Arc<dyn Machine>> {
        self.branch(cell).ok()
    }
}

/// Accepts the cell input and never reads it.
#[derive(Debug, Clone)]
pub struct CellBlind(pub Arc<dyn Machine>);

impl Machine for CellBlind {
    fn outcome(&self, s: StateIx, t: TypeIx) -> Result<Outcome> {
        self.0.outcome(s, t)
    }

    fn sparse(&self) -> Option<SparseOutcomes<'_>> {
        self.0.sparse()
    }

    fn is_cell_aware(&self) -> bool {
        true
    }

    fn ignores_cell(&self) -> bool {
        true
    }

    fn cell_outcome(&self, _cell: Option<usize>, s: StateIx, t: TypeIx) -> Result<Outcome> {
        self.0.outcome(s, t)
    }

    fn cell_branch(&self, _cell: Option<usize>) -> Option<Arc<dyn Machine>> {
        Some(self.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::ActionIx;

    fn o(a: usize, c: u64) -> Outcome {
        Outcome::new(ActionIx(a), c)
    }

    #[test]
    fn table_lookup_falls_back_in_order() {
        let t = BeliefTable::new().with_entry(StateIx(0), TypeIx(0), o(1, 3));
        assert_eq!(t.outcome(StateIx(0), TypeIx(0)).unwrap(), o(1, 3));
        assert_eq!(
            t.outcome(StateIx(1), TypeIx(0)).unwrap_err(),
            Error::MissingEntry { state: 1, ty: 0 }
        );
        let t = t.with_default(o(0, 0));
        assert_eq!(t.outcome(StateIx(1), TypeIx(0)).unwrap(), o(0, 0));
        assert_eq!(t.sparse().unwrap().overrides.count(), 1);
    }

    #[test]
    fn delegate_conflicts_are_reported() {
        let delegate: Arc<dyn Machine> = Arc::new(BeliefTable::constant(o(0, 1)));
        let t = BeliefTable::new()
            .with_delegate(delegate.clone())
            .with_entry(StateIx(0), TypeIx(0), o(0, 1))
            .with_entry(StateIx(1), TypeIx(0), o(1, 1));
        assert_eq!(t.check_delegate().unwrap(), vec![(StateIx(1), TypeIx(0))]);
        assert!(t.sparse().is_none());
        assert_eq!(t.outcome(StateIx(5), TypeIx(0)).unwrap(), o(0, 1));
        let tab = BeliefTable::tabulate(delegate.as_ref(), 3, 2).unwrap();
        assert_eq!(tab.len(), 6);
    }

    #[test]
    fn cell_switch_charges_for_reading() {
        let m = CellSwitch {
            per_cell: vec![Arc::new(BeliefTable::constant(o(1, 0)))],
            on_null: Arc::new(BeliefTable::constant(o(0, 0))),
            read_cost: 4,
        };
        assert_eq!(m.outcome(StateIx(0), TypeIx(0)).unwrap(), o(0, 0));
        assert_eq!(
            m.cell_outcome(None, StateIx(0), TypeIx(0)).unwrap(),
            o(0, 0)
        );
        assert_eq!(
            m.cell_outcome(Some(0), StateIx(0), TypeIx(0)).unwrap(),
            o(1, 4)
        );
        assert!(m.cell_outcome(Some(3), StateIx(0), TypeIx(0)).is_err());
    }
}
