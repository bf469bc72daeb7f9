//! Error type shared across the library.
//!
//! Every fallible operation returns [`Error`]; variants separate caller
//! mistakes (invalid or degenerate input, parse errors) from numerical
//! failures (non-convergence, instability, divergence) so binaries can map
//! them to distinct exit codes.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (shape mismatch,
    /// non-finite entry, out-of-range index, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input is structurally valid but numerically unusable, e.g. a
    /// distribution entry below the positivity floor where a strictly
    /// interior point is required.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A text format (model file, palette, image header) failed to parse.
    /// `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying I/O failure while reading or writing files.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// The matrix-scaling loop exhausted its iteration budget. Carries the
    /// last L1 marginal violation so callers can judge how close it got.
    #[error(
        "scaling did not converge within {iterations} iterations: \
         marginal residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
    )]
    Convergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    /// Floating-point breakdown (kernel underflow/overflow, zero divisor,
    /// non-finite intermediate). The message suggests a remedy.
    #[error("numerical instability: {0}")]
    Stability(String),

    /// The requested computation exceeds a hard resource bound
    /// (e.g. exhaustive enumeration over too many labelings).
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The flow produced an unbounded gradient; carries where it happened.
    #[error(
        "flow diverged at iteration {iteration}, node {node}: gradient entry \
         magnitude {magnitude:.3e} exceeds the guard; use a smaller step or a \
         larger smoothing parameter"
    )]
    Diverged {
        iteration: usize,
        node: usize,
        magnitude: f64,
    },
}

impl Error {
    /// Builds an invalid-input error.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Helper for degenerate-input errors.
    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }

    /// Builds a parse error for 1-based line `line`.
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }

    /// Helper for stability errors.
    pub(crate) fn stability(msg: impl Into<String>) -> Self {
        Error::Stability(msg.into())
    }
}
