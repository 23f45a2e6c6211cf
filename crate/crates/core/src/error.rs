use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid terminal set: {0}")]
    InvalidTerminals(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vertex sets overlap")]
    Overlapping,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("norm does not provide a {0} oracle")]
    MissingOracle(&'static str),

    #[error("{what} enumeration needs k <= {cap}, got k = {k}")]
    OracleCapExceeded { what: &'static str, cap: usize, k: usize },

    #[error("instance too large for exact enumeration: n = {n}, cap = {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("guess too low: no group accepted at iteration {iteration}")]
    GuessTooLow { iteration: usize },

    #[error("all {attempts} trials rejected")]
    AllTrialsRejected { attempts: usize },

    #[error("enumeration budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("iteration cap {cap} exceeded in {stage}")]
    IterationCap { stage: &'static str, cap: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, column, message: message.into() }
    }
}
