use thiserror::Error;

/// Errors raised by the numerical kernels.
///
/// The CLI maps [`Error::Divergence`], [`Error::Convergence`] and
/// [`Error::Degenerate`] to the numerical-guard exit code; everything else is a
/// validation failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite value encountered: {0}")]
    Numeric(String),
    #[error("memory budget exceeded: {0}")]
    Budget(String),
    #[error("NLS flow diverged: {0}")]
    Divergence(String),
    #[error("Krylov propagation did not converge: {0}")]
    Convergence(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    /// True for aborts raised by a numerical guard rather than by bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Divergence(_) | Error::Convergence(_) | Error::Degenerate(_) | Error::Numeric(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
