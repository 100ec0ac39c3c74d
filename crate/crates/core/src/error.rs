use thiserror::Error;

/// Errors raised by the estimation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty diagram")]
    EmptyDiagram,

    #[error("abscissa order: {0}")]
    AbscissaOrder(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("data error at row {row}: {msg}")]
    Data { row: usize, msg: String },

    #[error("likelihood unbounded/degenerate: {0}")]
    Degenerate(String),

    #[error("no convergence after {iterations} iterations (fenchel gap: violation {violation:.3e}, complementarity {complementarity:.3e})")]
    NoConvergence {
        iterations: usize,
        violation: f64,
        complementarity: f64,
    },

    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("separation condition violated: {0}")]
    Separation(String),

    #[error("quantile undefined under local bandwidths")]
    NonMonotone,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Singular { .. }
                | Error::Numerical(_)
                | Error::Degenerate(_)
                | Error::NonMonotone
                | Error::Separation(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
