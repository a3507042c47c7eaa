//! Finite-sum optimization with dual classical/quantum query accounting.

// Negated float comparisons are used on purpose so that NaN parameters fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hard;
pub mod harness;
pub mod katyusha;
pub mod ledger;
pub mod lowerbound;
pub mod mean;
pub mod objectives;
pub mod problem;
pub mod qvrg;
pub mod reductions;
pub mod spider;
pub mod suites;

pub use error::{Error, Result};
pub use ledger::QueryLedger;
pub use problem::{CaseTag, FiniteSumObjective, KnownOptimum, ProblemInstance, ProximalTerm, Vector};

/// Random number generator used by every stochastic routine.
pub type SimRng = rand_chacha::ChaCha8Rng;
