//! Greedy deterministic row-action solvers for `A x = b`.
//!
//! The maximal weighted residual Kaczmarz method (`Mwrk`) projects onto the
//! row with the largest weighted residual; the fast deterministic block
//! method (`Fdbk`) projects along `A^* eta` for the residual restricted to a
//! relaxed greedy row set. Both have heavy-ball variants (`Mmwrk`, `Mfdbk`).
//! The crate also ships the contraction constants that bound them, seeded
//! test-matrix generators, Matrix Market IO and a cubic B-spline curve fitter
//! built on the solvers.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bspline;
pub mod datagen;
pub mod error;
pub mod greedy;
pub mod linalg;
pub mod matrix;
pub mod mmio;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
pub use greedy::{build_eta, greedy_set, row_losses, Eta, IndexSet, LossVector};
pub use matrix::{residual, RowMatrix};
pub use rng::RngState;
pub use scalar::Scalar;
pub use solver::{
    solve, solve_observed, IterateState, RowActionSolver, SolveOutcome, SolveReport, SolverConfig,
    SolverMethod, StepOutcome, StepRecord, StopReason,
};
