//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Error, Debug)]
pub enum GateError {
    /// Tensor or network shape mismatch. Names both offending shapes.
    #[error("dimension mismatch: {context}: {left} vs {right}")]
    Dimension {
        context: String,
        left: String,
        right: String,
    },

    /// SMILES parse failure with the byte offset of the offending character.
    #[error("SMILES parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Dataset loading failure with the 1-based line number.
    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    /// Out-of-range argument (probabilities, counts, fractions).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// API contract violation (e.g. backward on a non-scalar loss).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Inconsistent or unusable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Singular or ill-conditioned linear system.
    #[error("linear algebra failure: {message} (condition estimate {condition:.3e})")]
    LinearAlgebra { message: String, condition: f64 },

    /// Geodesic integration aborted; reports the last parameter value reached.
    #[error("integration failure at tau={last_tau}: {message}")]
    Integration { message: String, last_tau: f64 },

    /// Non-finite gradient encountered during an optimizer step.
    #[error("non-finite gradient in parameter '{param}' at step {step}")]
    NonFiniteGradient { param: String, step: u64 },

    /// Training loss became non-finite.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GateError>;

impl GateError {
    pub fn dimension(context: impl Into<String>, left: impl ToString, right: impl ToString) -> Self {
        GateError::Dimension {
            context: context.into(),
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}
