//! Accelerated prediction-correction Lagrangian methods for linearly
//! constrained convex programs, with numerical certificates for their
//! convergence conditions.
//!
//! Problems come in three shapes: one block (`min f(x) s.t. Ax = b`), two
//! blocks, and m blocks solved by a Gauss-Seidel sweep.

// NaN must fail the parameter checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod reference;
pub mod schedule;
pub mod solver;
pub mod subproblem;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use problem::{Block, BlockProblem, ProblemKind};
pub use reference::ReferenceSolution;
pub use schedule::{Metric, PenaltyRule, PenaltySchedule, Rate, SolverParams, TauRule, TauSchedule};
pub use solver::{build_method, Method, Schedules, StartPoint, StepArtifacts, Variant};
