use thiserror::Error;

use crate::kernel::KernelError;
use crate::model::ModelError;
use crate::production::ProductionError;
use crate::tail::TailError;

/// Crate-level error for scenario handling, repair and robustness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error(transparent)]
    Production(#[from] ProductionError),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("event `{event}` does not apply to the {domain} domain")]
    EventNotApplicable { event: String, domain: String },
    #[error("invalid repair spec: {0}")]
    InvalidSpec(String),
    #[error("constraint `{0}` matched a relax rule but has no penalty")]
    MissingPenalty(String),
    #[error("no point available: solve ended with status {0}")]
    NoSolution(crate::model::Status),
    #[error("extensive form too large ({vars} variables, {constraints} constraints); use separate mode")]
    ExtensiveFormTooLarge { vars: usize, constraints: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl Error {
    /// True for errors caused by user input rather than solving.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NoSolution(_) | Error::Kernel(KernelError::TooLarge { .. }) | Error::ExtensiveFormTooLarge { .. }
        )
    }
}
