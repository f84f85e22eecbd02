//! Error type shared by every module of the library.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
///
/// Variants are grouped by origin: linear algebra, estimation, inference,
/// expansion/diagnostic evaluation, and resampling budgets. Callers that need
/// process exit codes can classify via [`Error::is_input_error`] and
/// [`Error::is_budget_error`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // --- linear algebra ---
    #[error("matrix is not symmetric within tolerance (max asymmetry {max_asymmetry:e})")]
    NonSymmetric { max_asymmetry: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("design matrix is numerically singular (column {column})")]
    SingularDesign { column: usize },
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("matrix entries must be finite (found {value} at row {row}, col {col})")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },

    // --- sampling / quantiles ---
    #[error("empty sample supplied where at least one value is required")]
    EmptySample,
    #[error("parameter {name} = {value} outside valid range {range}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    // --- estimation ---
    #[error("ordinary least squares requires p <= n (p = {p}, n = {n})")]
    DimensionExceedsSample { p: usize, n: usize },
    #[error("coordinate descent did not converge within {max_cycles} cycles (last sup-change {last_change:e})")]
    NoConvergence { max_cycles: usize, last_change: f64 },
    #[error("column {column} has zero sum of squares; its coordinate update is undefined")]
    ZeroWeightColumn { column: usize },
    #[error("initial estimate is exactly zero at coordinate {coordinate} with no stabilizer; weight is undefined")]
    ZeroInitialComponent { coordinate: usize },
    #[error("cross-validation fold of size {size} is too small (need >= 2 observations)")]
    FoldTooSmall { size: usize },
    #[error("this operation needs an initial estimate but none was supplied")]
    MissingInitialEstimate,

    // --- pivots / intervals ---
    #[error("residual variance estimate {value:e} is degenerate")]
    DegenerateVariance { value: f64 },
    #[error("active set is empty; bias correction and oracle variance are undefined")]
    EmptyActiveSet,
    #[error("active-set submatrix of the Gram matrix is singular")]
    SingularSubmatrix,
    #[error("true coefficient is zero at declared-support coordinate {coordinate}")]
    ZeroTrueCoefficient { coordinate: usize },

    // --- expansion / diagnostics ---
    #[error("this computation requires p <= n (p = {p}, n = {n})")]
    RequiresPleN { p: usize, n: usize },
    #[error("adaptive quadrature failed to reach tolerance {tol:e} (best error {achieved:e})")]
    QuadratureFailure { tol: f64, achieved: f64 },
    #[error("a variable block required by the condition check is empty or singular")]
    SingularBlock,
    #[error("unknown tuning rule variant `{0}`")]
    UnknownVariant(String),
    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),

    // --- resampling budgets ---
    #[error("too many failed bootstrap replicates: {failed} failures exceeded the budget of {budget} (B = {b})")]
    TooManyFailures { failed: usize, budget: usize, b: usize },
    #[error("too many failed Monte Carlo replicates: {failed} of {total} exceeded the 2% budget")]
    TooManyReplicateFailures { failed: usize, total: usize },
}

impl Error {
    /// True for errors caused by invalid caller input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptySample
                | Error::ParameterOutOfRange { .. }
                | Error::DimensionMismatch { .. }
                | Error::DimensionExceedsSample { .. }
                | Error::NonFiniteEntry { .. }
                | Error::UnknownVariant(_)
                | Error::UnknownPreset(_)
                | Error::FoldTooSmall { .. }
                | Error::MissingInitialEstimate
        )
    }

    /// True for reproducibility-budget exhaustion (failed-replicate quotas).
    pub fn is_budget_error(&self) -> bool {
        matches!(
            self,
            Error::TooManyFailures { .. } | Error::TooManyReplicateFailures { .. }
        )
    }
}
