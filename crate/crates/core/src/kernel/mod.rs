//! In-house LP/MILP kernel.
//!
//! [`solve_lp`] runs a dense bounded-variable primal simplex (phase 1 on
//! artificial variables, Dantzig pricing with a Bland fallback after a run of
//! degenerate pivots). [`solve_milp`] wraps it in best-first
//! branch-and-bound with most-fractional branching.
//!
//! The kernel targets desk-scale instances: models above
//! [`MAX_VARIABLES`] variables or [`MAX_CONSTRAINTS`] constraints are
//! rejected with [`KernelError::TooLarge`].

mod lp;
mod milp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Model;

pub use lp::solve_lp;
pub use milp::solve_milp;

pub const MAX_VARIABLES: usize = 2000;
pub const MAX_CONSTRAINTS: usize = 2000;

/// Number of consecutive degenerate pivots before switching to Bland's rule.
pub const BLAND_AFTER_DEGENERATE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveParams {
    pub feas_tol: f64,
    pub int_tol: f64,
    pub node_limit: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub gap_tol: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            int_tol: 1e-6,
            node_limit: 100_000,
            time_limit: None,
            gap_tol: 1e-9,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        let ok = self.feas_tol > 0.0
            && self.int_tol > 0.0
            && self.gap_tol > 0.0
            && self.node_limit >= 1
            && self.time_limit.is_none_or(|t| t > 0.0);
        if ok {
            Ok(())
        } else {
            Err(KernelError::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub simplex_iterations: u64,
    pub nodes_explored: u64,
    /// Infinite bounds serialize as "inf" / "-inf".
    #[serde(with = "bound")]
    pub best_bound: f64,
    /// Seconds. Not part of the serialized form so that result files stay
    /// byte-reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

mod bound {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid bound `{t}`"))),
        }
    }
}

impl Default for SolveStats {
    fn default() -> Self {
        Self {
            simplex_iterations: 0,
            nodes_explored: 0,
            best_bound: f64::NEG_INFINITY,
            wall_time: 0.0,
        }
    }
}

impl SolveStats {
    /// Accumulates counters from a sub-solve.
    pub fn absorb(&mut self, other: &SolveStats) {
        self.simplex_iterations += other.simplex_iterations;
        self.nodes_explored += other.nodes_explored;
        self.wall_time += other.wall_time;
    }

    /// Stats as a JSON fragment, wall time included.
    pub fn to_json_fragment(&self) -> serde_json::Value {
        serde_json::json!({
            "simplex_iterations": self.simplex_iterations,
            "nodes_explored": self.nodes_explored,
            "best_bound": if self.best_bound.is_finite() { Some(self.best_bound) } else { None },
            "wall_time": self.wall_time,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error(
        "model has {vars} variables and {constraints} constraints; the kernel accepts at most {} and {}",
        MAX_VARIABLES,
        MAX_CONSTRAINTS
    )]
    TooLarge { vars: usize, constraints: usize },
    #[error("invalid solve parameters: {0}")]
    InvalidParams(String),
}

pub(crate) fn check_size(model: &Model) -> Result<(), KernelError> {
    if model.num_vars() > MAX_VARIABLES || model.num_constraints() > MAX_CONSTRAINTS {
        return Err(KernelError::TooLarge {
            vars: model.num_vars(),
            constraints: model.num_constraints(),
        });
    }
    Ok(())
}
