use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A covariance matrix that is not symmetric, not positive definite, or
    /// violates the uncertainty principle.
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("index {index} out of range for {len} modes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unsupported model variant: {0}")]
    UnsupportedVariant(String),

    /// λ₂ ≥ λ₁ leaves the Bogoliubov transformation undefined.
    #[error("ill-defined Bogoliubov mode: lambda2 ({lambda2:e}) must be below lambda1 ({lambda1:e})")]
    IllDefinedMode { lambda1: f64, lambda2: f64 },

    /// The drift is not Hurwitz, so no steady state exists.
    #[error("no steady state: spectral abscissa {abscissa:e} is not negative")]
    NoSteadyState { abscissa: f64 },

    #[error("singular Sylvester block: {0}")]
    Singular(String),

    #[error("Schur decomposition did not converge")]
    SchurFailed,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("truncation did not converge: {0}")]
    NonConvergent(String),

    #[error("integration: {0}")]
    Integration(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
