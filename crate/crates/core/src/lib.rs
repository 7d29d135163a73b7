//! Factored low-rank matrix recovery with a column-sparsity (l2,0) penalty
//! and its difference-of-convex surrogate.
//!
//! The pieces, bottom-up:
//! - [`dense`]: column-major matrices, products, QR and SVD
//! - [`sampling`]: linear measurement operators and restricted eigenvalues
//! - [`penalty`], [`objective`], [`prox`]: the models
//! - [`solver`]: accelerated alternating prox-linear iterations
//! - [`diagnostics`]: stationarity, KL probes and optimal-set certificates
//! - [`harness`]: instance generation, experiments and file formats

pub mod dense;
pub mod diagnostics;
pub mod exec;
pub mod harness;
pub mod objective;
pub mod penalty;
pub mod prox;
pub mod sampling;
pub mod solver;

pub use dense::{DenseError, DenseMatrix};
pub use exec::Exec;
pub use objective::{FactorPair, Model, ModelSpec, ObjectiveError, ObjectiveValue};
pub use penalty::{PenaltyError, PenaltyParams};
pub use sampling::{OperatorKind, SamplingError, SamplingOperator};
pub use solver::{solve, SolveResult, SolverConfig, SolverError, Termination};
