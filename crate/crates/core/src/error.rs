use thiserror::Error;

pub type Result<T> = std::result::Result<T, BpbError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BpbError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sign-vector enumeration over {dim} coordinates exceeds the cap of {cap}")]
    OracleCap { dim: usize, cap: usize },

    #[error("oscillation of an empty block is undefined")]
    EmptyBlock,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The input does not meet the slack or normalisation a stage requires.
    #[error("{stage}: precondition violated: {detail}")]
    Precondition { stage: &'static str, detail: String },

    /// A runtime check on a stage's output failed. Always a defect, never a
    /// property of the input.
    #[error("{stage}: postcondition failed: {detail}")]
    Postcondition { stage: &'static str, detail: String },

    #[error("{stage}: search budget exhausted: {detail}")]
    BudgetExhausted { stage: &'static str, detail: String },
}

impl BpbError {
    pub(crate) fn pre(stage: &'static str, detail: impl Into<String>) -> Self {
        BpbError::Precondition {
            stage,
            detail: detail.into(),
        }
    }

    pub(crate) fn post(stage: &'static str, detail: impl Into<String>) -> Self {
        BpbError::Postcondition {
            stage,
            detail: detail.into(),
        }
    }

    pub fn is_precondition(&self) -> bool {
        matches!(self, BpbError::Precondition { .. })
    }
}
