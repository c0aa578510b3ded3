use thiserror::Error;

use crate::trainer::TrainTrace;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("unknown operator `{0}`")]
    UnknownOperator(String),

    #[error("operator {op} requires a y axis but the domain is 1-dimensional")]
    AxisMismatch { op: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch in {context}: expected {expected}, got {got}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("design matrix column {index} ({key}) is zero")]
    ZeroColumn { index: usize, key: String },

    #[error(
        "explicit scheme unstable: dt = {dt:.6e} exceeds diffusion limit {limit:.6e} \
         (refine the time grid or shrink the diffusive coefficients)"
    )]
    Unstable { dt: f64, limit: f64 },

    #[error("solution blow-up at time step {step}: |u| reached {max:.3e}")]
    BlowUp { step: usize, max: f64 },

    #[error("training diverged at epoch {epoch}: total loss {loss:.3e}")]
    Diverged {
        epoch: usize,
        loss: f64,
        /// Trace recorded up to the failing epoch.
        trace: Box<TrainTrace>,
    },

    #[error("singular linear system in {0}")]
    Singular(&'static str),
}

pub type Result<T> = std::result::Result<T, CoreError>;
