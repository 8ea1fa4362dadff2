use thiserror::Error;

/// Errors produced by the softqd core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the caller's input was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A problem returned a non-finite quality or descriptor.
    #[error("evaluation of solution {index} failed: {reason}")]
    Evaluation { index: usize, reason: String },

    /// Grid quadrature only supports low-dimensional behavior spaces.
    #[error("unsupported behavior dimension {0} (grid quadrature supports d <= 3)")]
    UnsupportedDimension(usize),

    /// A gradient term came out NaN or infinite.
    #[error("non-finite {term} gradient for solution {index}")]
    NonFiniteGradient { index: usize, term: GradientTerm },

    /// Eigensolver or similar numerical routine failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Wraps an error raised inside an optimizer run with its position.
    #[error("epoch {epoch}, batch {batch}: {source}")]
    InRun {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientTerm {
    Quality,
    Repulsion,
}

impl std::fmt::Display for GradientTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradientTerm::Quality => f.write_str("quality"),
            GradientTerm::Repulsion => f.write_str("repulsion"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
