//! Monte Carlo coverage harness: scenario generation, per-replicate
//! fit-and-bootstrap pipelines, and coverage aggregation.
//!
//! A [`Scenario`] describes one synthetic-data experiment: sample size,
//! dimension, true coefficient vector (supported on the leading block),
//! design correlation, noise level, tuning rule, replication counts, and the
//! target coordinates whose intervals are scored. [`run_coverage_study`]
//! replays the scenario `mc_reps` times — each replicate draws a fresh design
//! and error vector, fits the initial estimator and the adaptive LASSO, runs
//! one joint bootstrap pass, and builds every interval variant — then reports
//! empirical coverage with Monte Carlo standard errors and average lengths,
//! in the layout used by coverage tables (method columns, one row per
//! coordinate and sidedness).
//!
//! Replicates are deterministic functions of `(seed, replicate index)`: data,
//! bootstrap, and cross-validation randomness come from disjoint fixed
//! streams, so reports are identical across worker counts and across runs.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::bootstrap::{ci_percentile_t, ci_student, run_bootstrap_all, BootstrapConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{
    fit_alasso_with, fit_lasso, fit_ols, full_shrinkage_lambda, select_lambda_cv, AlassoConfig,
    AlassoFit, CvObjective, InitialEstimate,
};
use crate::numerics::{cholesky, Matrix, RngStream};
use crate::pivots::{
    ci_oracle_with_scaling, extended_float, BiasCorrection, CiMethod, ConfidenceInterval,
    IntervalSide, OracleScaling, PivotKind, PivotSpec, DEGENERATE_VARIANCE_TOL,
};

/// Multiplier taking a published tuning-rule value to this solver's penalty.
///
/// The square-root/fourth-root tuning rules the presets quote are calibrated
/// for a criterion that halves the residual sum of squares. The solver here
/// keeps the un-halved criterion `sum (y_i - x_i'u)^2 + lambda * penalty`, in
/// which the same amount of shrinkage requires twice the penalty value, so
/// preset construction multiplies rule values by this factor.
pub const RULE_TO_PENALTY: f64 = 2.0;

/// Fraction of Monte Carlo replicates allowed to fail before the whole run
/// is abandoned.
pub const MC_FAILURE_BUDGET_FRACTION: f64 = 0.02;

/// Interval methods scored by the harness, in report-column order.
pub const REPORT_METHODS: [CiMethod; 4] = [
    CiMethod::PercentileT,
    CiMethod::StudentR,
    CiMethod::StudentRbreve,
    CiMethod::OracleNormal,
];

/// Interval sides scored by the harness: a lower confidence bound (the
/// "one-sided" table columns) and the equal-tailed two-sided interval.
pub const REPORT_SIDES: [IntervalSide; 2] =
    [IntervalSide::LowerBound, IntervalSide::TwoSidedEqualTail];

// --- scenario description ---

/// Covariate-generating design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DesignSpec {
    /// Leading `p0` columns jointly normal with covariance `rho^{|i-j|}`;
    /// remaining columns independent standard normal.
    ArBlock { rho: f64 },
    /// All `p` columns jointly normal with unit variances and every pairwise
    /// covariance equal to `rho`.
    Equicorrelated { rho: f64 },
}

/// How the penalty level(s) are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Tuning {
    /// Fixed penalties, already in solver units (presets fill these from the
    /// rate rules times [`RULE_TO_PENALTY`]). `lambda1` drives the LASSO
    /// initial estimator and must be present when p > n.
    Theoretical {
        lambda: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        lambda1: Option<f64>,
    },
    /// Per-replicate K-fold cross-validation for the adaptive-LASSO penalty
    /// over a log-spaced grid under the full-shrinkage value. For p > n the
    /// initial LASSO penalty stays at the fixed `lambda1`.
    CrossValidated {
        folds: usize,
        grid_points: usize,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        lambda1: Option<f64>,
    },
}

impl Tuning {
    fn lambda1(&self) -> Option<f64> {
        match self {
            Tuning::Theoretical { lambda1, .. } => *lambda1,
            Tuning::CrossValidated { lambda1, .. } => *lambda1,
        }
    }
}

/// One coverage experiment: model, design, noise, tuning, replication plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Short label used in report headers ("a", "b", … for presets).
    pub name: String,
    pub n: usize,
    pub p: usize,
    /// Size of the true support, which occupies the leading coordinates.
    pub p0: usize,
    pub beta_true: Vec<f64>,
    pub design: DesignSpec,
    pub error_sigma: f64,
    pub mc_reps: usize,
    /// Bootstrap replicates per Monte Carlo replicate.
    pub b: usize,
    pub tuning: Tuning,
    /// Coordinates whose intervals are scored (0-based).
    pub targets: Vec<usize>,
    pub level: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Scenario {
    /// Checks the structural invariants; every entry point calls this.
    pub fn validate(&self) -> Result<()> {
        if self.p0 > self.p {
            return Err(Error::ParameterOutOfRange {
                name: "p0",
                value: self.p0 as f64,
                range: "[0, p]",
            });
        }
        if self.beta_true.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: self.beta_true.len(),
                context: "scenario true coefficient length",
            });
        }
        for (j, &b) in self.beta_true.iter().enumerate() {
            if j < self.p0 && b == 0.0 {
                return Err(Error::ZeroTrueCoefficient { coordinate: j });
            }
            if j >= self.p0 && b != 0.0 {
                return Err(Error::ParameterOutOfRange {
                    name: "beta_true",
                    value: b,
                    range: "0 outside the leading p0 coordinates",
                });
            }
        }
        if self.n == 0 {
            return Err(Error::EmptySample);
        }
        if !(self.error_sigma >= 0.0) {
            return Err(Error::ParameterOutOfRange {
                name: "error_sigma",
                value: self.error_sigma,
                range: "[0, inf)",
            });
        }
        if self.mc_reps == 0 {
            return Err(Error::ParameterOutOfRange {
                name: "mc_reps",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::ParameterOutOfRange {
                name: "level",
                value: self.level,
                range: "(0, 1)",
            });
        }
        if !(self.gamma > 0.0) {
            return Err(Error::ParameterOutOfRange {
                name: "gamma",
                value: self.gamma,
                range: "(0, inf)",
            });
        }
        if self.targets.is_empty() {
            return Err(Error::EmptySample);
        }
        for &t in &self.targets {
            if t >= self.p {
                return Err(Error::ParameterOutOfRange {
                    name: "target coordinate",
                    value: t as f64,
                    range: "[0, p)",
                });
            }
        }
        let rho = match self.design {
            DesignSpec::ArBlock { rho } => rho,
            DesignSpec::Equicorrelated { rho } => rho,
        };
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::ParameterOutOfRange {
                name: "rho",
                value: rho,
                range: "(-1, 1)",
            });
        }
        if self.p > self.n && self.tuning.lambda1().is_none() {
            return Err(Error::MissingInitialEstimate);
        }
        Ok(())
    }

    /// True support of the scenario: the leading `p0` coordinates.
    pub fn support(&self) -> Vec<usize> {
        (0..self.p0).collect()
    }
}

// --- presets ---

fn preset_seed(name: &str) -> u64 {
    // Arbitrary fixed values; distinct so presets never share streams.
    match name {
        "a" => 1101,
        "b" => 1202,
        "c" => 1303,
        "d" => 1404,
        "minnier" => 1505,
        "minnier5" => 1506,
        _ => unreachable!("preset_seed called for known presets only"),
    }
}

/// Built-in scenario presets.
///
/// `a`–`d` are the AR(0.3)-block designs at (n, p) = (60, 10), (60, 100),
/// (200, 80), (200, 500) with fourth-root ALASSO tuning (and square-root
/// LASSO tuning when p > n). `minnier` / `minnier5` are the equicorrelated
/// (ρ = 0.2) comparison design at (n, p) = (100, 10) with σ = 1 and σ = 5.
/// Rule values are converted to solver units via [`RULE_TO_PENALTY`]; the
/// p > n presets run 200 replicates to bound desk-scale runtime.
pub fn preset(name: &str) -> Result<Scenario> {
    let beta_ab = vec![4.0, -1.5, -8.0, 0.9, -3.0];
    let beta_cd = vec![4.0, 2.5, 0.8, -1.5, -2.0, -5.0, -7.5, 5.0, 1.5, -3.0];
    let pad = |head: &[f64], p: usize| {
        let mut beta = head.to_vec();
        beta.resize(p, 0.0);
        beta
    };
    let fourth_root = |n: usize, rule: f64| RULE_TO_PENALTY * rule * (n as f64).powf(0.25);
    let square_root = |n: usize, rule: f64| RULE_TO_PENALTY * rule * (n as f64).sqrt();

    let sc = match name {
        "a" => Scenario {
            name: "a".to_string(),
            n: 60,
            p: 10,
            p0: 5,
            beta_true: pad(&beta_ab, 10),
            design: DesignSpec::ArBlock { rho: 0.3 },
            error_sigma: 1.0,
            mc_reps: 500,
            b: 500,
            tuning: Tuning::Theoretical {
                lambda: fourth_root(60, 2.0),
                lambda1: None,
            },
            targets: vec![0, 3],
            level: 0.90,
            gamma: 1.0,
            seed: preset_seed("a"),
        },
        "b" => Scenario {
            name: "b".to_string(),
            n: 60,
            p: 100,
            p0: 5,
            beta_true: pad(&beta_ab, 100),
            design: DesignSpec::ArBlock { rho: 0.3 },
            error_sigma: 1.0,
            mc_reps: 200,
            b: 500,
            tuning: Tuning::Theoretical {
                lambda: fourth_root(60, 2.0),
                lambda1: Some(square_root(60, 0.5)),
            },
            targets: vec![0, 3],
            level: 0.90,
            gamma: 1.0,
            seed: preset_seed("b"),
        },
        "c" => Scenario {
            name: "c".to_string(),
            n: 200,
            p: 80,
            p0: 10,
            beta_true: pad(&beta_cd, 80),
            design: DesignSpec::ArBlock { rho: 0.3 },
            error_sigma: 1.0,
            mc_reps: 500,
            b: 500,
            tuning: Tuning::Theoretical {
                lambda: fourth_root(200, 2.0),
                lambda1: None,
            },
            targets: vec![0],
            level: 0.90,
            gamma: 1.0,
            seed: preset_seed("c"),
        },
        "d" => Scenario {
            name: "d".to_string(),
            n: 200,
            p: 500,
            p0: 10,
            beta_true: pad(&beta_cd, 500),
            design: DesignSpec::ArBlock { rho: 0.3 },
            error_sigma: 1.0,
            mc_reps: 200,
            b: 500,
            tuning: Tuning::Theoretical {
                lambda: fourth_root(200, 2.0),
                lambda1: Some(square_root(200, 0.5)),
            },
            targets: vec![0],
            level: 0.90,
            gamma: 1.0,
            seed: preset_seed("d"),
        },
        "minnier" | "minnier5" => Scenario {
            name: name.to_string(),
            n: 100,
            p: 10,
            p0: 4,
            beta_true: pad(&[2.0, -2.0, 0.5, -0.5], 10),
            design: DesignSpec::Equicorrelated { rho: 0.2 },
            error_sigma: if name == "minnier5" { 5.0 } else { 1.0 },
            mc_reps: 500,
            b: 500,
            tuning: Tuning::Theoretical {
                lambda: fourth_root(100, 0.5),
                lambda1: None,
            },
            targets: vec![0],
            level: 0.90,
            gamma: 1.0,
            seed: preset_seed(name),
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    debug_assert!(sc.validate().is_ok(), "presets must validate");
    Ok(sc)
}

/// All preset names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 6] = ["a", "b", "c", "d", "minnier", "minnier5"];

// --- data generation ---

// Stream-id layout per replicate r: 4r = data, 4r + 1 = bootstrap,
// 4r + 2 = cross-validation, 4r + 3 reserved.
const STREAMS_PER_REPLICATE: u64 = 4;

fn replicate_stream(master_seed: u64, rep_index: usize, offset: u64) -> RngStream {
    RngStream::new(
        master_seed,
        (rep_index as u64) * STREAMS_PER_REPLICATE + offset,
    )
}

/// Cholesky factor of the correlated block's population covariance.
fn design_chol(design: DesignSpec, p: usize, p0: usize) -> Result<Matrix> {
    let (dim, sigma): (usize, Box<dyn Fn(usize, usize) -> f64>) = match design {
        DesignSpec::ArBlock { rho } => (
            p0,
            Box::new(move |i: usize, j: usize| rho.powi((i as i32 - j as i32).abs())),
        ),
        DesignSpec::Equicorrelated { rho } => (
            p,
            Box::new(move |i: usize, j: usize| if i == j { 1.0 } else { rho }),
        ),
    };
    let mut cov = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            cov.set(i, j, sigma(i, j));
        }
    }
    cholesky(&cov)
}

/// Draws one replicate's dataset: fresh design and errors, deterministic in
/// `(master_seed, rep_index)`.
///
/// Row i consumes its correlated-block normals, then its tail normals; all
/// error draws follow the design draws, so the stream layout is fixed.
pub fn generate_scenario_data(
    sc: &Scenario,
    rep_index: usize,
    master_seed: u64,
) -> Result<Dataset> {
    sc.validate()?;
    let mut rng = replicate_stream(master_seed, rep_index, 0);
    let chol = design_chol(sc.design, sc.p, sc.p0)?;
    let block = chol.rows();
    let mut x = Matrix::zeros(sc.n, sc.p);
    for i in 0..sc.n {
        let z = rng.normal_vec(block);
        for r in 0..block {
            let mut v = 0.0;
            for c in 0..=r {
                v += chol.get(r, c) * z[c];
            }
            x.set(i, r, v);
        }
        for j in block..sc.p {
            x.set(i, j, rng.normal());
        }
    }
    let mut y = x.matvec(&sc.beta_true)?;
    for yi in y.iter_mut() {
        *yi += sc.error_sigma * rng.normal();
    }
    Dataset::new(x, y)
}

// --- per-replicate pipeline ---

/// One scored observation: did the interval cover, and how long was it.
struct CellObservation {
    covered: bool,
    length: f64,
}

/// Everything one replicate contributes to the aggregate.
struct ReplicateOutcome {
    /// Observations in fixed (target × method × side) order.
    cells: Vec<CellObservation>,
    selected_superset: bool,
    selected_exactly: bool,
}

fn fit_initial(sc: &Scenario, data: &Dataset) -> Result<InitialEstimate> {
    if sc.p <= sc.n {
        fit_ols(data)
    } else {
        let lambda1 = sc.tuning.lambda1().ok_or(Error::MissingInitialEstimate)?;
        fit_lasso(data, lambda1)
    }
}

fn choose_lambda(
    sc: &Scenario,
    data: &Dataset,
    init: &InitialEstimate,
    rep_index: usize,
) -> Result<f64> {
    match &sc.tuning {
        Tuning::Theoretical { lambda, .. } => Ok(*lambda),
        Tuning::CrossValidated {
            folds, grid_points, ..
        } => {
            let lambda_max = full_shrinkage_lambda(data);
            let points = (*grid_points).max(2);
            // Log-spaced grid over [1e-3, 1] * lambda_max, ascending.
            let grid: Vec<f64> = (0..points)
                .map(|k| {
                    let t = k as f64 / (points - 1) as f64;
                    lambda_max * 1e-3f64.powf(1.0 - t)
                })
                .collect();
            let mut cv_rng = replicate_stream(sc.seed, rep_index, 2);
            let report = select_lambda_cv(
                data,
                Some(init),
                sc.gamma,
                &grid,
                *folds,
                CvObjective::AlassoGivenInit,
                &mut cv_rng,
            )?;
            Ok(report.chosen_lambda)
        }
    }
}

/// Restriction of joint q-coordinate draws to a single scored coordinate, so
/// the scalar interval constructors apply.
fn coordinate_draws(
    all: &crate::bootstrap::BootstrapDraws,
    k: usize,
) -> crate::bootstrap::BootstrapDraws {
    let mut one = all.clone();
    one.values = all.values.iter().map(|row| vec![row[k]]).collect();
    one.observed_beta_d = vec![all.observed_beta_d[k]];
    one.observed_correction = all.observed_correction.as_ref().map(|c| BiasCorrection {
        f_breve: vec![c.f_breve[k]],
        sigma_breve_sq: c.sigma_breve_sq,
        beta_breve: c.beta_breve.clone(),
        active_set_used: c.active_set_used.clone(),
    });
    one
}

/// A noiseless fit leaves nothing to resample: every interval degenerates to
/// the point estimate. Scored honestly: a point covers the truth only when
/// the fit reproduces it exactly (true zeros usually; penalized nonzeros
/// usually not).
fn degenerate_outcome(sc: &Scenario, fit: &AlassoFit) -> ReplicateOutcome {
    let mut cells = Vec::with_capacity(sc.targets.len() * REPORT_METHODS.len() * REPORT_SIDES.len());
    for &target in &sc.targets {
        let estimate = fit.beta_hat[target];
        let truth = sc.beta_true[target];
        for _method in REPORT_METHODS {
            for _side in REPORT_SIDES {
                cells.push(CellObservation {
                    covered: estimate == truth,
                    length: 0.0,
                });
            }
        }
    }
    selection_flags(sc, fit, cells)
}

fn selection_flags(sc: &Scenario, fit: &AlassoFit, cells: Vec<CellObservation>) -> ReplicateOutcome {
    let support = sc.support();
    let selected_superset = support.iter().all(|j| fit.active_set.contains(j));
    let selected_exactly = fit.active_set == support;
    ReplicateOutcome {
        cells,
        selected_superset,
        selected_exactly,
    }
}

fn run_replicate(sc: &Scenario, rep_index: usize) -> Result<ReplicateOutcome> {
    let data = generate_scenario_data(sc, rep_index, sc.seed)?;
    let init = fit_initial(sc, &data)?;
    let lambda = choose_lambda(sc, &data, &init, rep_index)?;
    let config = AlassoConfig::new(lambda, sc.gamma);
    let fit = fit_alasso_with(&data, &init, &config)?;

    // A noiseless scenario degenerates even though penalty shrinkage keeps the
    // fit's own residuals nonzero: the restricted-initial scale behind the
    // bias-corrected pivot is exactly zero, so studentizing is undefined.
    if sc.error_sigma == 0.0 || fit.sigma_hat_sq <= DEGENERATE_VARIANCE_TOL {
        return Ok(degenerate_outcome(sc, &fit));
    }

    // One joint bootstrap pass over all scored coordinates; the per-pivot
    // draws are split per coordinate afterwards.
    let d_rows: Vec<Vec<f64>> = sc
        .targets
        .iter()
        .map(|&j| {
            let mut row = vec![0.0; sc.p];
            row[j] = 1.0;
            row
        })
        .collect();
    let joint_spec = PivotSpec::new(Matrix::from_rows(&d_rows)?, PivotKind::Raw)?;
    let boot_config = BootstrapConfig::new(replicate_stream(sc.seed, rep_index, 1))
        .with_b(sc.b)
        .with_correction_lambda(fit.lambda / 2.0);
    let draws = run_bootstrap_all(&data, &fit, &init, &joint_spec, &boot_config)?;
    if draws.rbreve.is_none() {
        // An empty active set leaves the corrected pivot undefined; the
        // replicate is recorded as failed rather than scored partially.
        return Err(Error::EmptyActiveSet);
    }

    let mut cells =
        Vec::with_capacity(sc.targets.len() * REPORT_METHODS.len() * REPORT_SIDES.len());
    for (k, &target) in sc.targets.iter().enumerate() {
        let truth = sc.beta_true[target];
        let t_draws = coordinate_draws(&draws.t, k);
        let r_draws = coordinate_draws(&draws.r, k);
        let rb_draws = coordinate_draws(draws.rbreve.as_ref().expect("checked above"), k);
        let oracle_spec = PivotSpec::coordinate(target, sc.p, PivotKind::Raw)?;
        for method in REPORT_METHODS {
            for side in REPORT_SIDES {
                let ci: ConfidenceInterval = match method {
                    CiMethod::PercentileT => ci_percentile_t(&t_draws, sc.level, side)?,
                    CiMethod::StudentR => ci_student(&r_draws, sc.level, side)?,
                    CiMethod::StudentRbreve => ci_student(&rb_draws, sc.level, side)?,
                    CiMethod::OracleNormal => ci_oracle_with_scaling(
                        &fit,
                        &data,
                        &oracle_spec,
                        sc.level,
                        side,
                        OracleScaling::N,
                    )?,
                };
                cells.push(CellObservation {
                    covered: ci.covers(truth),
                    length: ci.length,
                });
            }
        }
    }
    Ok(selection_flags(sc, &fit, cells))
}

// --- aggregation ---

/// Aggregate for one (coordinate, method, side) combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageCell {
    pub coordinate: usize,
    pub method: CiMethod,
    pub side: IntervalSide,
    /// Fraction of scored replicates whose interval covered the truth.
    pub coverage: f64,
    /// `sqrt(coverage * (1 - coverage) / replicates_used)`.
    pub mc_standard_error: f64,
    /// Mean interval length over scored replicates (infinite for one-sided
    /// intervals; serialized as the string "inf").
    #[serde(with = "extended_float")]
    pub avg_length: f64,
    /// Raw covered count behind `coverage`.
    pub covered: usize,
}

/// A replicate the study skipped, with the error that removed it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedReplicate {
    pub rep_index: usize,
    pub message: String,
}

/// Output of [`run_coverage_study`]: per-cell coverage plus selection and
/// failure accounting. Runtime is informational and excluded from
/// serialization so that re-runs of the same scenario serialize identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: Scenario,
    /// Cells in (target × method × side) order matching the scenario.
    pub cells: Vec<CoverageCell>,
    pub replicates_attempted: usize,
    /// Replicates that completed and were scored.
    pub replicates_used: usize,
    pub failed_replicates: Vec<FailedReplicate>,
    /// Replicates whose active set contained the true support.
    pub superset_count: usize,
    /// Replicates whose active set equalled the true support exactly.
    pub exact_selection_count: usize,
    #[serde(skip)]
    pub runtime: Duration,
}

impl CoverageReport {
    /// The cell for one (coordinate, method, side), if scored.
    pub fn cell(&self, coordinate: usize, method: CiMethod, side: IntervalSide) -> Option<&CoverageCell> {
        self.cells
            .iter()
            .find(|c| c.coordinate == coordinate && c.method == method && c.side == side)
    }

    /// Fraction of scored replicates selecting exactly the true support.
    pub fn exact_selection_rate(&self) -> f64 {
        if self.replicates_used == 0 {
            0.0
        } else {
            self.exact_selection_count as f64 / self.replicates_used as f64
        }
    }

    /// Text table in the coverage-table layout: method columns, one row per
    /// coordinate and sidedness, two-sided lengths in parentheses.
    pub fn text_table(&self) -> String {
        let sc = &self.scenario;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {}: n={} p={} p0={} level={:.0}% reps={}/{} B={}",
            sc.name,
            sc.n,
            sc.p,
            sc.p0,
            sc.level * 100.0,
            self.replicates_used,
            self.replicates_attempted,
            sc.b,
        );
        let _ = writeln!(
            out,
            "selection: exact {}/{} ({:.3}), superset {}/{}",
            self.exact_selection_count,
            self.replicates_used,
            self.exact_selection_rate(),
            self.superset_count,
            self.replicates_used,
        );
        let _ = write!(out, "{:<12}{:<12}", "coordinate", "side");
        for method in REPORT_METHODS {
            let _ = write!(out, "{:<18}", method.to_string());
        }
        out.push('\n');
        for &target in &sc.targets {
            for side in REPORT_SIDES {
                let side_label = match side {
                    IntervalSide::LowerBound => "one-sided",
                    IntervalSide::TwoSidedEqualTail => "two-sided",
                    IntervalSide::UpperBound => "upper",
                    IntervalSide::TwoSidedSymmetric => "symmetric",
                };
                let _ = write!(out, "{:<12}{:<12}", format!("beta_{}", target + 1), side_label);
                for method in REPORT_METHODS {
                    let cell = self
                        .cell(target, method, side)
                        .expect("report cells cover the scored grid");
                    let entry = if cell.avg_length.is_finite() {
                        format!("{:.3} ({:.3})", cell.coverage, cell.avg_length)
                    } else {
                        format!("{:.3}", cell.coverage)
                    };
                    let _ = write!(out, "{entry:<18}");
                }
                out.push('\n');
            }
        }
        if !self.failed_replicates.is_empty() {
            let _ = writeln!(
                out,
                "failed replicates: {} (recorded, excluded from coverage)",
                self.failed_replicates.len()
            );
        }
        out
    }
}

/// Runs the scenario's full Monte Carlo study on one worker.
pub fn run_coverage_study(sc: &Scenario) -> Result<CoverageReport> {
    run_coverage_study_with_workers(sc, 1)
}

/// Runs the scenario's full Monte Carlo study across `workers` threads.
///
/// Replicates are independent jobs keyed by index with their own streams;
/// the aggregate is identical for every worker count.
pub fn run_coverage_study_with_workers(sc: &Scenario, workers: usize) -> Result<CoverageReport> {
    sc.validate()?;
    let started = Instant::now();
    let outcomes: Vec<Result<ReplicateOutcome>> = if workers <= 1 {
        (0..sc.mc_reps).map(|rep| run_replicate(sc, rep)).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool construction");
        pool.install(|| {
            (0..sc.mc_reps)
                .into_par_iter()
                .map(|rep| run_replicate(sc, rep))
                .collect()
        })
    };

    let cell_count = sc.targets.len() * REPORT_METHODS.len() * REPORT_SIDES.len();
    let mut covered = vec![0usize; cell_count];
    let mut length_sums = vec![0.0f64; cell_count];
    let mut used = 0usize;
    let mut superset_count = 0usize;
    let mut exact_selection_count = 0usize;
    let mut failed_replicates = Vec::new();
    for (rep, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(outcome) => {
                used += 1;
                superset_count += outcome.selected_superset as usize;
                exact_selection_count += outcome.selected_exactly as usize;
                for (slot, obs) in outcome.cells.iter().enumerate() {
                    covered[slot] += obs.covered as usize;
                    length_sums[slot] += obs.length;
                }
            }
            Err(err) => failed_replicates.push(FailedReplicate {
                rep_index: rep,
                message: err.to_string(),
            }),
        }
    }
    let failed = failed_replicates.len();
    if failed as f64 > MC_FAILURE_BUDGET_FRACTION * sc.mc_reps as f64 {
        return Err(Error::TooManyReplicateFailures {
            failed,
            total: sc.mc_reps,
        });
    }
    if used == 0 {
        return Err(Error::EmptySample);
    }

    let mut cells = Vec::with_capacity(cell_count);
    let mut slot = 0usize;
    for &target in &sc.targets {
        for method in REPORT_METHODS {
            for side in REPORT_SIDES {
                let coverage = covered[slot] as f64 / used as f64;
                cells.push(CoverageCell {
                    coordinate: target,
                    method,
                    side,
                    coverage,
                    mc_standard_error: (coverage * (1.0 - coverage) / used as f64).sqrt(),
                    avg_length: length_sums[slot] / used as f64,
                    covered: covered[slot],
                });
                slot += 1;
            }
        }
    }

    Ok(CoverageReport {
        scenario: sc.clone(),
        cells,
        replicates_attempted: sc.mc_reps,
        replicates_used: used,
        failed_replicates,
        superset_count,
        exact_selection_count,
        runtime: started.elapsed(),
    })
}
