//! Penalized-regression inference toolkit built around the adaptive LASSO.
//!
//! The crate fits adaptive-LASSO (and plain LASSO) linear models by cyclic
//! coordinate descent, then quantifies uncertainty for a single coefficient
//! through three routes:
//!
//! * oracle-style normal intervals from the selected model,
//! * a residual bootstrap of three pivots — the raw estimation error, its
//!   studentized version, and a bias-corrected studentized version that
//!   removes the penalty-induced shrinkage before studentizing,
//! * Edgeworth-type density approximations for the studentized pivots, used
//!   as diagnostics for when the bootstrap's refinement can be trusted.
//!
//! Supporting modules provide condition diagnostics for the design and
//! penalty sequence, a Monte Carlo coverage harness with reproducible seeded
//! streams, and the numerics substrate (dense linear algebra, normal
//! distribution functions, empirical quantiles).
//!
//! # Conventions
//!
//! The penalized objective is `sum_i (y_i - x_i'b)^2 + lambda * sum_j w_j
//! |b_j|` — the residual sum of squares is *not* halved. Estimation error is
//! measured on the sqrt(n) scale throughout: pivots and interval widths are
//! stated for `sqrt(n) * (estimate - target)`.

pub mod bootstrap;
pub mod dataset;
pub mod diagnostics;
pub mod edgeworth;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod pivots;
pub mod simulation;

pub use bootstrap::{
    ci_percentile_t, ci_student, run_bootstrap, run_bootstrap_all, BootstrapConfig,
    BootstrapDraws, BootstrapOutput,
};
pub use dataset::{ColumnScale, Dataset, Standardize};
pub use diagnostics::{
    check_c1, check_c6_window, condition_report, theoretical_lambda, C6Window, ConditionInputs,
    ConditionReport, DesignVariant, SupportMode, TuningStage, Verdict,
};
pub use edgeworth::{
    build_spec, ee_cdf, pi_density, psi_density, EdgeworthSpec, EeKind, ErrorMoments,
};
pub use error::{Error, Result};
pub use estimators::{
    fit_alasso, fit_lasso, fit_ols, full_shrinkage_lambda, select_lambda_cv, AlassoConfig,
    AlassoFit, CvReport, InitialEstimate, InitialEstimator,
};
pub use pivots::{
    bias_correction, bias_correction_with_lambda, ci_oracle, ci_oracle_with_scaling,
    restricted_sigma, sign_weights, BiasCorrection, CiMethod, ConfidenceInterval, IntervalSide,
    OracleScaling, PivotKind, PivotSpec, DEGENERATE_VARIANCE_TOL,
};
pub use simulation::{
    generate_scenario_data, preset, run_coverage_study, run_coverage_study_with_workers,
    CoverageCell, CoverageReport, DesignSpec, Scenario, Tuning, PRESET_NAMES, RULE_TO_PENALTY,
};
