use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A backward pass was handed a cache that did not come from the matching forward pass.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite {component} at epoch {epoch}")]
    NonFinite { component: &'static str, epoch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unresolved trial ids: {}", .0.join(", "))]
    UnresolvedTrialIds(Vec<String>),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
