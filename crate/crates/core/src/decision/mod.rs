//! Standard and computational decision problems over finite carriers.

mod computational;
mod dist;
mod evaluate;
mod prior;
mod standard;

use std::collections::HashMap;
use std::fmt;

pub(crate) use computational::attach_machine;
pub use computational::{
    ComplexityUtility, ComputationalProblem, Machine, MachineEntry, MachineSet, Outcome,
    SparseOutcomes,
};
pub use dist::{OutcomeDistribution, WeightedOutcome};
pub use evaluate::{best_machine, expected_utility_machine, CellLayout, Evaluator};
pub use prior::{condition_prior, JointPrior};
pub use standard::{best_action, expected_utility_action, StandardProblem, UtilityTable};

use crate::error::{Error, Result};

macro_rules! index_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub usize);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_type!(
    /// Index into a problem's state carrier.
    StateIx
);
index_type!(
    /// Index into a problem's type carrier.
    TypeIx
);
index_type!(
    /// Index into a problem's action carrier.
    ActionIx
);
index_type!(
    /// Position of a machine in its declared machine set.
    MachineIx
);

/// Ordered, uniquely named carrier set.
///
/// Large generated carriers (the safe scenario has a million states) use the
/// `Indexed` form, whose names are synthesized on demand.
#[derive(Debug, Clone)]
pub enum Labels {
    Named {
        names: Vec<String>,
        index: HashMap<String, usize>,
    },
    Indexed {
        prefix: String,
        offset: usize,
        len: usize,
    },
}

impl Labels {
    pub fn named<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::DuplicateId(n.clone()));
            }
        }
        Ok(Labels::Named { names, index })
    }

    /// Names `prefix{offset}`, `prefix{offset+1}`, ...
    pub fn indexed(prefix: impl Into<String>, offset: usize, len: usize) -> Self {
        Labels::Indexed {
            prefix: prefix.into(),
            offset,
            len,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Named { names, .. } => names.len(),
            Labels::Indexed { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self, i: usize) -> String {
        match self {
            Labels::Named { names, .. } => names[i].clone(),
            Labels::Indexed { prefix, offset, .. } => format!("{prefix}{}", offset + i),
        }
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        match self {
            Labels::Named { index, .. } => index.get(name).copied(),
            Labels::Indexed {
                prefix,
                offset,
                len,
            } => {
                let rest = name.strip_prefix(prefix.as_str())?;
                if rest.starts_with('+') || (rest.len() > 1 && rest.starts_with('0')) {
                    return None;
                }
                let n: usize = rest.parse().ok()?;
                let i = n.checked_sub(*offset)?;
                (i < *len).then_some(i)
            }
        }
    }
}

/// A bitstring, most significant (first read) bit first.
pub type Bits = Vec<bool>;

/// Parses `"1011"` into bits; any other character is rejected.
pub fn parse_bits(text: &str) -> Result<Bits> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Invalid(format!("`{text}` is not a bitstring"))),
        })
        .collect()
}

pub fn render_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Fixed-width big-endian encoding of `value`.
pub fn bits_of(value: u64, width: usize) -> Bits {
    (0..width).rev().map(|i| (value >> i) & 1 == 1).collect()
}
