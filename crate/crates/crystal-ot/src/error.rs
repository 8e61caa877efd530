use thiserror::Error;

/// Errors surfaced by construction, solving, and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("restricted problem infeasible: source atom {source_index} cannot be routed over the allowed edge set")]
    InfeasibleRestricted { source_index: usize },

    #[error("solver did not terminate within {iterations} pivots")]
    IterationCap { iterations: usize },

    #[error("selection methods disagree: restricted (primary {restricted_primary}, secondary {restricted_secondary}) vs lexicographic (primary {lexicographic_primary}, secondary {lexicographic_secondary})")]
    MethodDisagreement {
        restricted_primary: f64,
        restricted_secondary: f64,
        lexicographic_primary: f64,
        lexicographic_secondary: f64,
        restricted_plan: Vec<(usize, usize, f64)>,
        lexicographic_plan: Vec<(usize, usize, f64)>,
    },

    #[error("support too large for vertex enumeration: {rows}x{cols} (limit {limit}x{limit})")]
    OracleTooLarge { rows: usize, cols: usize, limit: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
