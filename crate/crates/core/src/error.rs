use thiserror::Error;

/// Errors raised by the simulation, estimation and realization routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdsError {
    #[error("dimension mismatch in {matrix}: expected {expected}, found {found}")]
    DimensionMismatch {
        matrix: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("trajectory {index} has length {length}, at least {required} required")]
    TrajectoryTooShort {
        index: usize,
        length: usize,
        required: usize,
    },

    #[error("index {index} out of range (length {length})")]
    IndexOutOfRange { index: usize, length: usize },

    #[error("missing moment block ({0}, {1}, {2})")]
    MissingBlock(usize, usize, usize),

    #[error("eigenvalue pairing failed; unmatched eigenvalues {unmatched:?}")]
    PairingFailure { unmatched: Vec<f64> },

    #[error("complex eigenvalues with imaginary part {imag:.3e} (spectral radius {radius:.3e})")]
    ComplexEigenvalues { imag: f64, radius: f64 },

    #[error("rank-deficient least-squares system: {0}")]
    RankDeficient(String),

    #[error("near-collinear Markov estimates; Gram matrix smallest singular value {0:.3e}")]
    CollinearComponents(f64),

    #[error("component {0} has zero norm")]
    ZeroNormComponent(usize),

    #[error("covariance not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("rank {rank} exceeds tensor capacity {capacity}")]
    RankTooLarge { rank: usize, capacity: usize },
}

impl LdsError {
    /// Whether the error stems from a numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LdsError::PairingFailure { .. }
                | LdsError::ComplexEigenvalues { .. }
                | LdsError::RankDeficient(_)
                | LdsError::CollinearComponents(_)
                | LdsError::ZeroNormComponent(_)
                | LdsError::NotPositiveDefinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LdsError>;
