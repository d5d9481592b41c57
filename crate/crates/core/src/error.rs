use thiserror::Error;

/// Failures raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid precision context: {0}")]
    InvalidContext(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("series did not reach the tail tolerance within {cap} terms (q too close to 1 for the precision budget)")]
    NonConvergence { cap: usize },

    #[error("precision budget exceeded: {0}")]
    PrecisionBudget(String),

    #[error("no sign change on bracket [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    SameSign {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("no sign change for index {index} at q = {q}: {what} is not real here")]
    MissingSignChange { index: usize, q: f64, what: String },

    #[error("scan found {} sign changes for index {index}, expected one", .candidates.len())]
    MultipleSignChanges {
        index: usize,
        candidates: Vec<(f64, f64)>,
    },

    #[error("bracket failure for spectral index {j}: {reason}")]
    BracketFailure { j: usize, reason: String },

    #[error("asymptotic model is missing constant `{0}`")]
    MissingConstant(&'static str),

    #[error("degenerate sequence: {0}")]
    DegenerateSequence(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
