use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index {index} out of range 1..={size}")]
    IndexOutOfRange { index: i64, size: usize },
    #[error("block does not contain the support of a_n: needs [{need_lo}, {need_hi}], got [{got_lo}, {got_hi}]")]
    BlockTooSmall { need_lo: i64, need_hi: i64, got_lo: i64, got_hi: i64 },
    #[error("counting window degenerate at n={n}: {reason}")]
    WindowDegenerate { n: i64, reason: String },
    #[error("no convergence in {what} after {attempts} attempts (last change {last_change:e})")]
    NonConvergence { what: &'static str, attempts: usize, last_change: f64 },
    #[error("orthogonality certificate failed: max |U^T U - I| = {defect:e}")]
    OrthogonalityCertificate { defect: f64 },
    #[error("contraction condition violated: sup-norm C1 of phi is {norm} > 1/2")]
    ContractionViolated { norm: f64 },
    #[error("rate fit needs at least 3 usable points, got {usable}")]
    TooFewPoints { usable: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("at n={n} in {op}: {source}")]
    AtGridPoint {
        n: i64,
        op: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
