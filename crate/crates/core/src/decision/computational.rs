use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::decision::{
    ActionIx, Bits, JointPrior, Labels, MachineIx, StateIx, TypeIx, UtilityTable,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// What a machine is believed to do at one (state, type): its output action
/// and its complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome {
    pub action: ActionIx,
    pub complexity: u64,
}

impl Outcome {
    pub fn new(action: ActionIx, complexity: u64) -> Self {
        Outcome { action, complexity }
    }
}

/// A default outcome plus the (state, type) cells where the machine deviates
/// from it. Evaluators use this to avoid touching every state of large
/// carriers.
pub struct SparseOutcomes<'a> {
    pub default: Outcome,
    pub overrides: Box<dyn Iterator<Item = (StateIx, TypeIx, Outcome)> + 'a>,
}

/// A non-interactive machine: the output and complexity assignments of one
/// element of the machine set.
pub trait Machine: Send + Sync + fmt::Debug {
    fn outcome(&self, state: StateIx, ty: TypeIx) -> Result<Outcome>;

    /// Sparse description, when the machine has one. Must agree with
    /// [`Machine::outcome`] everywhere.
    fn sparse(&self) -> Option<SparseOutcomes<'_>> {
        None
    }

    /// Machines that accept the partition cell as an extra input.
    fn is_cell_aware(&self) -> bool {
        false
    }

    /// Cell-aware machines that never look at the cell.
    fn ignores_cell(&self) -> bool {
        false
    }

    /// Outcome when told the cell (`None` is the null cell).
    fn cell_outcome(&self, cell: Option<usize>, state: StateIx, ty: TypeIx) -> Result<Outcome> {
        let _ = (cell, state, ty);
        Err(Error::NotCellAware(String::new()))
    }

    /// The plain machine this one behaves as once told `cell`, when it has
    /// one. Lets evaluators reuse the sparse path for cell-aware machines.
    fn cell_branch(&self, cell: Option<usize>) -> Option<Arc<dyn Machine>> {
        let _ = cell;
        None
    }
}

#[derive(Debug, Clone)]
pub struct MachineEntry {
    pub id: String,
    pub machine: Arc<dyn Machine>,
}

/// Ordered machine set with unique identifiers; declaration order is the
/// tie-break order.
#[derive(Debug, Clone, Default)]
pub struct MachineSet {
    entries: Vec<MachineEntry>,
    index: HashMap<String, usize>,
}

impl MachineSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: impl Into<String>, machine: Arc<dyn Machine>) -> Result<MachineIx> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.entries.len());
        self.entries.push(MachineEntry { id, machine });
        Ok(MachineIx(self.entries.len() - 1))
    }

    pub fn with(mut self, id: impl Into<String>, machine: Arc<dyn Machine>) -> Result<Self> {
        self.push(id, machine)?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, ix: MachineIx) -> Option<&MachineEntry> {
        self.entries.get(ix.0)
    }

    pub fn find(&self, id: &str) -> Result<MachineIx> {
        self.index
            .get(id)
            .map(|&i| MachineIx(i))
            .ok_or_else(|| Error::UnknownMachine(id.to_string()))
    }

    pub fn all(&self) -> Vec<MachineIx> {
        (0..self.entries.len()).map(MachineIx).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MachineIx, &MachineEntry)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| (MachineIx(i), e))
    }
}

type UtilityFn<T> = dyn Fn(StateIx, TypeIx, ActionIx, u64) -> T + Send + Sync;

/// u′(s, t, a, c): utility that also sees the machine's complexity.
#[derive(Clone)]
pub struct ComplexityUtility<T> {
    f: Arc<UtilityFn<T>>,
    monotone: bool,
}

impl<T> fmt::Debug for ComplexityUtility<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexityUtility")
            .field("monotone", &self.monotone)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ComplexityUtility<T> {
    pub fn new(f: impl Fn(StateIx, TypeIx, ActionIx, u64) -> T + Send + Sync + 'static) -> Self {
        ComplexityUtility {
            f: Arc::new(f),
            monotone: false,
        }
    }

    /// Declares u′ nonincreasing in complexity. Speedup analysis relies on
    /// this declaration to pick the smallest admissible complexity directly.
    pub fn monotone(
        f: impl Fn(StateIx, TypeIx, ActionIx, u64) -> T + Send + Sync + 'static,
    ) -> Self {
        ComplexityUtility {
            f: Arc::new(f),
            monotone: true,
        }
    }

    /// u′ = u(s,t,a) − charge·c. Monotone when `charge ≥ 0`.
    pub fn linear_charge(table: UtilityTable<T>, charge: T) -> Self {
        let monotone = !charge.is_negative_value();
        let f = move |s, t, a, c: u64| table.get(s, t, a).clone() - charge.clone() * T::from_u64(c);
        ComplexityUtility {
            f: Arc::new(f),
            monotone,
        }
    }

    pub fn eval(&self, s: StateIx, t: TypeIx, a: ActionIx, c: u64) -> T {
        (self.f)(s, t, a, c)
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }
}

/// (S, T, A, Pr, 𝓜, 𝒞, out, u′) with finite carriers. Output and complexity
/// assignments live in the machines themselves.
#[derive(Debug, Clone)]
pub struct ComputationalProblem<T> {
    pub states: Labels,
    pub types: Labels,
    pub actions: Labels,
    pub prior: JointPrior<T>,
    pub utility: ComplexityUtility<T>,
    pub machines: MachineSet,
    /// Bit encodings handed to interactive machines and informants.
    pub type_bits: Vec<Bits>,
    pub state_bits: Vec<Bits>,
}

impl<T: Scalar> ComputationalProblem<T> {
    pub fn new(
        states: Labels,
        types: Labels,
        actions: Labels,
        prior: JointPrior<T>,
        utility: ComplexityUtility<T>,
        machines: MachineSet,
    ) -> Result<Self> {
        if prior.n_states() != states.len() || prior.n_types() != types.len() {
            return Err(Error::Dimension("prior does not match S × T".into()));
        }
        let type_bits = vec![Vec::new(); types.len()];
        let state_bits = vec![Vec::new(); states.len()];
        Ok(ComputationalProblem {
            states,
            types,
            actions,
            prior,
            utility,
            machines,
            type_bits,
            state_bits,
        })
    }

    pub fn with_type_bits(mut self, bits: Vec<Bits>) -> Result<Self> {
        if bits.len() != self.types.len() {
            return Err(Error::Dimension("one bit encoding per type".into()));
        }
        self.type_bits = bits;
        Ok(self)
    }

    pub fn with_state_bits(mut self, bits: Vec<Bits>) -> Result<Self> {
        if bits.len() != self.states.len() {
            return Err(Error::Dimension("one bit encoding per state".into()));
        }
        self.state_bits = bits;
        Ok(self)
    }

    pub fn with_prior(&self, prior: JointPrior<T>) -> Self {
        ComputationalProblem {
            prior,
            ..self.clone()
        }
    }

    pub fn with_machines(&self, machines: MachineSet) -> Self {
        ComputationalProblem {
            machines,
            ..self.clone()
        }
    }

    pub fn machine(&self, ix: MachineIx) -> Result<&MachineEntry> {
        self.machines
            .get(ix)
            .ok_or_else(|| Error::UnknownMachine(ix.0.to_string()))
    }

    /// Checks that every machine is total on the support and only outputs
    /// actions of A.
    pub fn validate_machines(&self) -> Result<()> {
        for (_, entry) in self.machines.iter() {
            for (s, t, _) in self.prior.iter() {
                let o = entry
                    .machine
                    .outcome(s, t)
                    .map_err(|e| attach_machine(e, &entry.id))?;
                if o.action.0 >= self.actions.len() {
                    return Err(Error::InvalidAction {
                        value: o.action.0 as i64,
                        actions: self.actions.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Rewrites table-level errors to name the machine that raised them.
pub(crate) fn attach_machine(err: Error, id: &str) -> Error {
    match err {
        Error::MissingEntry { state, ty } => Error::PartialAssignment {
            machine: id.to_string(),
            state,
            ty,
        },
        Error::NotCellAware(_) => Error::NotCellAware(id.to_string()),
        other => other,
    }
}
