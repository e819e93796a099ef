//! Decision theory with costly computation, evaluated exactly.
//!
//! A decision maker chooses a machine rather than an action; utility may
//! depend on the machine's complexity. The crate represents such problems
//! over finite carriers, finds optimal machines in finite machine sets,
//! and computes the value of information, of computational information, of
//! conversation and of computational speedup.
//!
//! Every routine is generic over [`Scalar`]; the [`Exact`] instance
//! (arbitrary-precision rationals) is the one reports and checks use.

pub mod bias;
pub mod conversation;
pub mod decision;
pub mod error;
pub mod info;
pub mod machine;
pub mod report;
pub mod runner;
pub mod scalar;
pub mod scenario;
pub mod speedup;
pub mod tape;
pub mod zk;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Exact = num::rational::BigRational;

pub type ExactStandardProblem = decision::StandardProblem<Exact>;
pub type ExactComputationalProblem = decision::ComputationalProblem<Exact>;
pub type F64ComputationalProblem = decision::ComputationalProblem<f64>;
pub type F32ComputationalProblem = decision::ComputationalProblem<f32>;
