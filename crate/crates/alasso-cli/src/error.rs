//! CLI-layer errors and their process exit codes.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit code for malformed input: bad CSV, missing columns, unusable flags.
pub const EXIT_INPUT: i32 = 2;
/// Exit code for numerical failures inside the library.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit code for exceeding a reproducibility budget (too many failed
/// bootstrap or Monte Carlo replicates).
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("malformed CSV at line {line}: {detail}")]
    MalformedCsv { line: u64, detail: String },
    #[error("non-numeric cell `{value}` at line {line}, column `{column}`")]
    NonNumericCell {
        line: u64,
        column: String,
        value: String,
    },
    #[error("response column `{0}` not found in the header")]
    MissingResponseColumn(String),
    #[error("`{0}` names no covariate column (use a 0-based index or a header name)")]
    UnknownCoordinate(String),
    #[error("either --lambda or --cv is required")]
    MissingLambda,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest replay: {0}")]
    Replay(String),
    #[error("{outputs} of {total} replayed outputs differ from the manifest")]
    ReplayMismatch { outputs: usize, total: usize },
    #[error(transparent)]
    Lib(#[from] alasso::Error),
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Maps the error to the documented exit taxonomy: 2 for input problems,
    /// 3 for numerical failures, 4 for exhausted reproducibility budgets.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MalformedCsv { .. }
            | CliError::NonNumericCell { .. }
            | CliError::MissingResponseColumn(_)
            | CliError::UnknownCoordinate(_)
            | CliError::MissingLambda
            | CliError::Io { .. }
            | CliError::Replay(_) => EXIT_INPUT,
            CliError::ReplayMismatch { .. } => EXIT_NUMERICAL,
            CliError::Lib(e) if e.is_input_error() => EXIT_INPUT,
            CliError::Lib(e) if e.is_budget_error() => EXIT_BUDGET,
            CliError::Lib(_) | CliError::Json(_) => EXIT_NUMERICAL,
        }
    }

    /// A usage hint printed after the error message, when one exists.
    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Lib(alasso::Error::EmptyActiveSet) => Some(
                "the bias-corrected pivot needs a nonempty active set; \
                 lower --lambda or use --method student-R",
            ),
            CliError::Lib(alasso::Error::DimensionExceedsSample { .. }) => {
                Some("with p > n supply --lambda1 to use a LASSO initial estimate")
            }
            _ => None,
        }
    }
}
