use thiserror::Error;

use crate::secular::Trench;

#[derive(Debug, Error)]
pub enum CqrError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("tensor index ({i}, {j}, {k}) out of range for n = {n}")]
    TensorIndex { i: usize, j: usize, k: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("weight matrix is not positive definite")]
    WeightNotPd,

    #[error("model Hessian is singular at s = 0 when beta != 0")]
    HessianAtOrigin,

    #[error("shifted matrix is not positive definite at lambda = {0}")]
    Factorization(f64),

    #[error("no secular root on the {0} trench")]
    NoRoot(Trench),

    #[error("secular Newton iteration did not converge within {0} iterations")]
    NewtonStalled(usize),

    #[error("hard case could not be resolved: {0}")]
    HardCase(String),

    #[error("case 5 root does not decrease the model")]
    NoDecrease,

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed problem file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CqrError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(CqrError::Dimension { expected, got })
    }
}
