use std::fmt;
use std::path::Path;

use ldslab::LdsError;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage,
    Data,
    Numerical,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Usage => 2,
            ExitKind::Data => 3,
            ExitKind::Numerical => 4,
        }
    }
}

/// A failure with an exit class and a stable snake_case code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ExitKind,
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Usage,
            code: "usage".into(),
            message: message.into(),
        }
    }

    pub fn data(code: &str, message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Data,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::data("io", format!("{}: {err}", path.display()))
    }

    pub fn missing(flag: &str) -> Self {
        CliError {
            kind: ExitKind::Usage,
            code: "missing_argument".into(),
            message: format!("--{flag} is required"),
        }
    }

    /// The final stderr line, e.g. `error code=rank_too_large exit=3`.
    pub fn machine_line(&self) -> String {
        format!("error code={} exit={}", self.code, self.kind.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn lds_code(err: &LdsError) -> &'static str {
    match err {
        LdsError::DimensionMismatch { .. } => "dimension_mismatch",
        LdsError::NonFinite(_) => "non_finite",
        LdsError::InvalidArgument(_) => "invalid_argument",
        LdsError::EmptyDataset => "empty_dataset",
        LdsError::TrajectoryTooShort { .. } => "trajectory_too_short",
        LdsError::IndexOutOfRange { .. } => "index_out_of_range",
        LdsError::MissingBlock(..) => "missing_block",
        LdsError::PairingFailure { .. } => "pairing_failure",
        LdsError::ComplexEigenvalues { .. } => "complex_eigenvalues",
        LdsError::RankDeficient(_) => "rank_deficient",
        LdsError::CollinearComponents(_) => "collinear_components",
        LdsError::ZeroNormComponent(_) => "zero_norm_component",
        LdsError::NotPositiveDefinite(_) => "not_positive_definite",
        LdsError::RankTooLarge { .. } => "rank_too_large",
    }
}

impl From<LdsError> for CliError {
    fn from(err: LdsError) -> Self {
        CliError {
            kind: if err.is_numerical() { ExitKind::Numerical } else { ExitKind::Data },
            code: lds_code(&err).into(),
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
