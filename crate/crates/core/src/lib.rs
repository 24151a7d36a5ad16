//! Recoverable optimization workbench.
//!
//! Builds MILP models for airline tail assignment and multi-site production
//! planning, solves them with a self-contained simplex / branch-and-bound
//! kernel, and repairs incumbent plans after disruptions by re-optimizing
//! with frozen variables, elastic constraints and a deviation-aware objective.

pub mod domain;
mod error;
pub mod kernel;
pub mod model;
pub mod production;
pub mod repair;
pub mod rng;
pub mod robustness;
pub mod scenario;
pub mod tail;
pub mod vns;

pub use error::Error;
pub use kernel::{solve_lp, solve_milp, KernelError, SolveParams, SolveStats};
pub use model::{
    ConstrId, ConstraintSpec, Kpi, LinExpr, Model, ModelError, Relax, Sense, Solution, Status,
    VarId, VarKind, VarSpec,
};
