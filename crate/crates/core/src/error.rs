use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The truncated coherent state lost more norm than allowed.
    #[error("truncation deficit {deficit:.3e} exceeds {tolerance:.1e} (alpha = {alpha}, cutoff = {cutoff})")]
    Truncation {
        alpha: f64,
        cutoff: usize,
        deficit: f64,
        tolerance: f64,
    },

    #[error("operator is not Hermitian (max |A - A^dagger| = {0:.3e})")]
    NotHermitian(f64),

    #[error("index {index} out of range for {len} {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires {expected}, got {found}")]
    VariantMismatch { expected: String, found: String },

    #[error("cost function returned {value} at theta = {theta:?}")]
    NonFiniteCost { value: f64, theta: Vec<f64> },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
