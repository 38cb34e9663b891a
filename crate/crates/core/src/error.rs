use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate genotype matrix")]
    DegenerateGenotypes,

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("separation detected")]
    Separation,

    #[error("IRLS did not converge after {iterations} iterations (deviance trace: {trace:?})")]
    NotConverged { iterations: usize, trace: Vec<f64> },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether the error reflects a numerical problem rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::Separation | Error::Numerical(_) | Error::RankDeficient
        )
    }
}
