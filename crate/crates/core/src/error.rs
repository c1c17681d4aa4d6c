use std::path::PathBuf;

use thiserror::Error;

use crate::model::FittedModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has zero variance")]
    ConstantColumn(usize),

    #[error("input contains NaN or infinite values")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid fold count K={k} for N={n} observations")]
    BadK { k: usize, n: usize },

    #[error("degenerate split of {n} observations ({val} for validation)")]
    DegenerateSplit { n: usize, val: usize },

    #[error("fold {fold} leaves only {size} training observations")]
    FoldTooSmall { fold: usize, size: usize },

    #[error("solver did not converge within {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        last: Box<FittedModel>,
    },

    #[error("unpenalized refit did not converge within {0} iterations")]
    NonConvergent(usize),

    #[error("response has a single class; logistic fits need both 0 and 1")]
    SingleClass,

    #[error("design restricted to the support is rank deficient")]
    SingularDesign,

    #[error("correlation rho={0} must lie strictly inside (-1, 1)")]
    BadRho(f64),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("paired differences have zero variance")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("metric undefined: {0}")]
    Undefined(&'static str),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("target column `{0}` not found in header")]
    MissingTarget(String),

    #[error("line {line}: logistic target must be 0 or 1, found {value}")]
    NonBinaryTarget { line: u64, value: f64 },

    #[error("too many failed repetitions: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
