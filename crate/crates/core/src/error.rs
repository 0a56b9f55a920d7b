use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("integration diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("relative degree violated: decoupling matrix is singular ({0:e})")]
    RelativeDegree(f64),

    #[error("quadratic program is infeasible")]
    QpInfeasible,

    #[error("quadratic program failed: {0}")]
    QpNumerical(String),

    #[error("training loss became non-finite at epoch {epoch} (last finite loss {last_loss:e})")]
    NonFiniteLoss { epoch: usize, last_loss: f64 },

    #[error("malformed estimator file: {0}")]
    Format(String),
}
