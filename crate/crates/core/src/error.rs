use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Library-wide error type.
///
/// Variants are grouped so a caller (e.g. the CLI) can map them onto coarse
/// exit classes: invalid inputs, numeric failures, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad model specification or model parameters.
    #[error("invalid model: {0}")]
    Model(String),

    /// An argument violated an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Experiment configuration rejected during validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// A normalization case was requested for a model whose moments do not
    /// support it (e.g. case `a` with infinite variance).
    #[error("case mismatch: {0}")]
    CaseMismatch(String),

    /// Exact-law computation refused: the partition table would be too large.
    #[error("n = {n} exceeds the exact-law size limit {max}")]
    SizeLimit { n: u64, max: u64 },

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge (residual {residual:e})")]
    Quadrature { residual: f64 },

    /// A numeric result failed an internal consistency check.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether this error is a numeric failure (as opposed to invalid input).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::Numeric(_))
    }
}
