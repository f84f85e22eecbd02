//! Command implementations, shared by the flag path and manifest replay.
//!
//! Each command resolves to a serializable config struct; `exec_*` turns a
//! config into output files and a stdout summary. Replay deserializes the
//! config recorded in a manifest and calls the same functions, so a fresh run
//! and a replay cannot diverge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use alasso::estimators::CvObjective;
use alasso::numerics::{Matrix, RngStream};
use alasso::{
    ci_oracle, ci_percentile_t, ci_student, condition_report, fit_alasso, fit_lasso, fit_ols,
    full_shrinkage_lambda, run_bootstrap, select_lambda_cv, AlassoFit, BootstrapConfig,
    CiMethod, ConditionInputs, ConfidenceInterval, Dataset, EdgeworthSpec, EeKind,
    InitialEstimate, IntervalSide, PivotKind, PivotSpec, Scenario, Standardize, SupportMode,
    RULE_TO_PENALTY,
};

use crate::error::{CliError, Result};
use crate::io::{self, Table};

/// RNG stream ids for single-fit commands, mirroring the per-replicate
/// layout of the simulation harness (data = 0, bootstrap = 1, CV = 2).
const BOOTSTRAP_STREAM: u64 = 1;
const CV_STREAM: u64 = 2;

/// Cross-validation grids span `[CV_GRID_LO, 1] * full_shrinkage_lambda`,
/// log-spaced — the same span the simulation harness uses.
const CV_GRID_LO: f64 = 1e-3;

/// What an executed command hands back to the runner.
pub struct CommandOutput {
    /// Files to write under the output directory.
    pub files: Vec<(String, Vec<u8>)>,
    /// Human-readable summary for stdout.
    pub summary: String,
    /// Seeds consumed, keyed by purpose.
    pub seeds: BTreeMap<String, u64>,
    /// Files read during execution; a replay re-reads them, so the manifest
    /// checksums them.
    pub inputs: Vec<PathBuf>,
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn std_label(kind: Standardize) -> &'static str {
    match kind {
        Standardize::UnitNorm => "unit-norm",
        Standardize::UnitSd => "unit-sd",
        Standardize::None => "none",
    }
}

fn side_label(side: IntervalSide) -> &'static str {
    match side {
        IntervalSide::LowerBound => "lower-bound",
        IntervalSide::UpperBound => "upper-bound",
        IntervalSide::TwoSidedEqualTail => "two-sided",
        IntervalSide::TwoSidedSymmetric => "symmetric two-sided",
    }
}

// ---------------------------------------------------------------------------
// fit

/// Resolved model-fitting configuration, shared by every command that fits.
///
/// `lambda` and `lambda1` are in the published tuning-rule convention; the
/// solver criterion (which does not halve the residual sum of squares)
/// applies [`RULE_TO_PENALTY`] times these values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub input: PathBuf,
    pub response: String,
    pub lambda: Option<f64>,
    pub lambda1: Option<f64>,
    pub gamma: f64,
    pub cv: bool,
    pub folds: usize,
    pub grid_points: usize,
    /// Adaptive-weight stabilizer; `None` keeps the n^{-1/2} default.
    pub stabilizer: Option<f64>,
    pub standardize: Standardize,
    pub response_scale: bool,
    pub seed: u64,
}

/// Cross-validation outcome recorded in fit reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvSummary {
    pub chosen_lambda_rule: f64,
    pub chosen_lambda_solver: f64,
    pub folds: usize,
    pub grid_solver: Vec<f64>,
    pub mean_errors: Vec<f64>,
}

struct PreparedFit {
    table: Table,
    data: Dataset,
    init: InitialEstimate,
    initial_kind: &'static str,
    fit: AlassoFit,
    lambda_rule: f64,
    cv: Option<CvSummary>,
}

fn prepare_fit(cfg: &FitConfig) -> Result<PreparedFit> {
    let table = io::read_table(&cfg.input, &cfg.response)?;
    let mut data = table.dataset.standardized(cfg.standardize)?;
    if cfg.response_scale {
        data = data.scaled_response()?;
    }
    let (mut init, initial_kind) = match cfg.lambda1 {
        Some(l1) => (fit_lasso(&data, RULE_TO_PENALTY * l1)?, "lasso"),
        None => (fit_ols(&data)?, "ols"),
    };
    if let Some(a) = cfg.stabilizer {
        init = init.with_stabilizer(a)?;
    }
    let (lambda_rule, cv) = if cfg.cv {
        let lambda_max = full_shrinkage_lambda(&data);
        let points = cfg.grid_points.max(2);
        let grid: Vec<f64> = (0..points)
            .map(|k| {
                let t = k as f64 / (points - 1) as f64;
                lambda_max * CV_GRID_LO.powf(1.0 - t)
            })
            .collect();
        let mut rng = RngStream::new(cfg.seed, CV_STREAM);
        let report = select_lambda_cv(
            &data,
            Some(&init),
            cfg.gamma,
            &grid,
            cfg.folds,
            CvObjective::AlassoGivenInit,
            &mut rng,
        )?;
        let summary = CvSummary {
            chosen_lambda_rule: report.chosen_lambda / RULE_TO_PENALTY,
            chosen_lambda_solver: report.chosen_lambda,
            folds: report.folds,
            grid_solver: report.grid,
            mean_errors: report.mean_errors,
        };
        (summary.chosen_lambda_rule, Some(summary))
    } else {
        (cfg.lambda.ok_or(CliError::MissingLambda)?, None)
    };
    let fit = fit_alasso(&data, &init, RULE_TO_PENALTY * lambda_rule, cfg.gamma)?;
    Ok(PreparedFit {
        table,
        data,
        init,
        initial_kind,
        fit,
        lambda_rule,
        cv,
    })
}

fn fit_seeds(cfg: &FitConfig) -> BTreeMap<String, u64> {
    let mut seeds = BTreeMap::new();
    seeds.insert("master".to_string(), cfg.seed);
    seeds
}

#[derive(Serialize)]
struct OriginalScale {
    coefficients: Vec<f64>,
    intercept: f64,
}

#[derive(Serialize)]
struct FitReport {
    n: usize,
    p: usize,
    response: String,
    covariates: Vec<String>,
    standardize: &'static str,
    response_scaled: bool,
    initial: &'static str,
    lambda1_rule: Option<f64>,
    lambda_rule: f64,
    lambda_solver: f64,
    gamma: f64,
    stabilizer: f64,
    coefficients: Vec<f64>,
    active_set: Vec<usize>,
    active_names: Vec<String>,
    sigma_hat_sq: f64,
    iterations: usize,
    converged: bool,
    original_scale: OriginalScale,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<CvSummary>,
}

fn build_fit_report(cfg: &FitConfig, prep: &PreparedFit) -> Result<FitReport> {
    let (coefficients, intercept) = prep.data.original_scale_coefficients(&prep.fit.beta_hat)?;
    Ok(FitReport {
        n: prep.data.n(),
        p: prep.data.p(),
        response: prep.table.response_name.clone(),
        covariates: prep.table.covariate_names.clone(),
        standardize: std_label(cfg.standardize),
        response_scaled: cfg.response_scale,
        initial: prep.initial_kind,
        lambda1_rule: cfg.lambda1,
        lambda_rule: prep.lambda_rule,
        lambda_solver: prep.fit.lambda,
        gamma: prep.fit.gamma,
        stabilizer: prep.init.stabilizer,
        coefficients: prep.fit.beta_hat.clone(),
        active_set: prep.fit.active_set.clone(),
        active_names: prep
            .fit
            .active_set
            .iter()
            .map(|&j| prep.table.covariate_names[j].clone())
            .collect(),
        sigma_hat_sq: prep.fit.sigma_hat_sq,
        iterations: prep.fit.iterations,
        converged: prep.fit.converged,
        original_scale: OriginalScale {
            coefficients,
            intercept,
        },
        cv: prep.cv.clone(),
    })
}

fn fit_summary(report: &FitReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "n={} p={}, initial={}, standardize={}, lambda={:.6} (rule units)",
        report.n, report.p, report.initial, report.standardize, report.lambda_rule
    );
    if let Some(cv) = &report.cv {
        let _ = writeln!(
            s,
            "lambda chosen by {}-fold cross-validation over {} grid points",
            cv.folds,
            cv.grid_solver.len()
        );
    }
    let _ = writeln!(
        s,
        "active set ({}/{}): {}",
        report.active_set.len(),
        report.p,
        report.active_names.join(" ")
    );
    let _ = writeln!(
        s,
        "sigma_hat_sq={:.6}, {} cycles, converged={}",
        report.sigma_hat_sq, report.iterations, report.converged
    );
    let width = report
        .active_names
        .iter()
        .map(String::len)
        .chain(std::iter::once("(intercept)".len()))
        .max()
        .unwrap_or(8);
    let _ = writeln!(s, "{:<width$}  {:>12}  {:>14}", "", "fitted", "original-scale");
    for &j in &report.active_set {
        let _ = writeln!(
            s,
            "{:<width$}  {:>12.6}  {:>14.6}",
            report.covariates[j], report.coefficients[j], report.original_scale.coefficients[j]
        );
    }
    let _ = write!(
        s,
        "{:<width$}  {:>12}  {:>14.6}",
        "(intercept)", "", report.original_scale.intercept
    );
    s
}

pub fn exec_fit(cfg: &FitConfig) -> Result<CommandOutput> {
    let prep = prepare_fit(cfg)?;
    let report = build_fit_report(cfg, &prep)?;
    Ok(CommandOutput {
        files: vec![("fit_report.json".to_string(), to_json_bytes(&report)?)],
        summary: fit_summary(&report),
        seeds: fit_seeds(cfg),
        inputs: vec![cfg.input.clone()],
    })
}

// ---------------------------------------------------------------------------
// ci

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CiConfig {
    #[serde(flatten)]
    pub fit: FitConfig,
    /// 0-based covariate index or header name.
    pub coordinate: String,
    pub method: CiMethod,
    pub level: f64,
    pub side: IntervalSide,
    pub b: usize,
    pub workers: usize,
}

#[derive(Serialize)]
struct CiReport {
    n: usize,
    p: usize,
    coordinate: usize,
    coordinate_name: String,
    method: CiMethod,
    level: f64,
    side: IntervalSide,
    b: usize,
    seed: u64,
    lambda_rule: f64,
    lambda_solver: f64,
    active_set: Vec<usize>,
    /// Point estimate on the fitted (standardized) scale.
    estimate: f64,
    interval: ConfidenceInterval,
    failed_replicates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    caveat: Option<String>,
}

pub fn exec_ci(cfg: &CiConfig) -> Result<CommandOutput> {
    let prep = prepare_fit(&cfg.fit)?;
    let j = prep.table.resolve_coordinate(&cfg.coordinate)?;
    let p = prep.data.p();

    let (interval, failed, caveat) = match cfg.method {
        CiMethod::OracleNormal => {
            let spec = PivotSpec::coordinate(j, p, PivotKind::Raw)?;
            (ci_oracle(&prep.fit, &prep.data, &spec, cfg.level, cfg.side)?, 0, None)
        }
        method => {
            let kind = match method {
                CiMethod::PercentileT => PivotKind::Raw,
                CiMethod::StudentR => PivotKind::Studentized,
                CiMethod::StudentRbreve => PivotKind::BiasCorrected,
                CiMethod::OracleNormal => unreachable!(),
            };
            let spec = PivotSpec::coordinate(j, p, kind)?;
            let config = BootstrapConfig::new(RngStream::new(cfg.fit.seed, BOOTSTRAP_STREAM))
                .with_b(cfg.b)
                .with_workers(cfg.workers)
                .with_correction_lambda(prep.fit.lambda / 2.0);
            let draws = run_bootstrap(&prep.data, &prep.fit, &prep.init, &spec, &config)?;
            let interval = match method {
                CiMethod::PercentileT => ci_percentile_t(&draws, cfg.level, cfg.side)?,
                _ => ci_student(&draws, cfg.level, cfg.side)?,
            };
            (interval, draws.failed_replicates, draws.caveat)
        }
    };

    let report = CiReport {
        n: prep.data.n(),
        p,
        coordinate: j,
        coordinate_name: prep.table.covariate_names[j].clone(),
        method: cfg.method,
        level: cfg.level,
        side: cfg.side,
        b: cfg.b,
        seed: cfg.fit.seed,
        lambda_rule: prep.lambda_rule,
        lambda_solver: prep.fit.lambda,
        active_set: prep.fit.active_set.clone(),
        estimate: prep.fit.beta_hat[j],
        interval,
        failed_replicates: failed,
        caveat,
    };

    let mut summary = format!(
        "{} {:.0}% {} interval for {}: [{:.6}, {:.6}]\npoint estimate {:.6} (fitted scale), B={}, failed replicates {}",
        report.method,
        100.0 * report.level,
        side_label(report.side),
        report.coordinate_name,
        report.interval.lower,
        report.interval.upper,
        report.estimate,
        report.b,
        report.failed_replicates
    );
    if let Some(w) = &report.interval.warning {
        let _ = write!(summary, "\nwarning: {w}");
    }
    if let Some(c) = &report.caveat {
        let _ = write!(summary, "\ncaveat: {c}");
    }

    Ok(CommandOutput {
        files: vec![("ci_report.json".to_string(), to_json_bytes(&report)?)],
        summary,
        seeds: fit_seeds(&cfg.fit),
        inputs: vec![cfg.fit.input.clone()],
    })
}

// ---------------------------------------------------------------------------
// screen

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub input: PathBuf,
    pub response: String,
    pub threshold: f64,
}

#[derive(Serialize)]
struct ScreenColumn {
    name: String,
    index: usize,
    correlation: f64,
}

#[derive(Serialize)]
struct ScreenReport {
    n: usize,
    p: usize,
    threshold: f64,
    kept: Vec<ScreenColumn>,
    dropped: Vec<ScreenColumn>,
    /// Constant columns: correlation undefined, excluded with a warning.
    zero_variance: Vec<String>,
}

pub fn exec_screen(cfg: &ScreenConfig) -> Result<CommandOutput> {
    let table = io::read_table(&cfg.input, &cfg.response)?;
    let data = &table.dataset;
    let n = data.n() as f64;
    let y_mean = data.y().iter().sum::<f64>() / n;
    let y_ss: f64 = data.y().iter().map(|v| (v - y_mean).powi(2)).sum();
    if y_ss == 0.0 {
        return Err(CliError::Lib(alasso::Error::DegenerateVariance {
            value: 0.0,
        }));
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut zero_variance = Vec::new();
    for (j, name) in table.covariate_names.iter().enumerate() {
        let col = data.x().col(j);
        let mean = col.iter().sum::<f64>() / n;
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        if ss == 0.0 {
            zero_variance.push(name.clone());
            continue;
        }
        let cov: f64 = col
            .iter()
            .zip(data.y())
            .map(|(x, y)| (x - mean) * (y - y_mean))
            .sum();
        let correlation = cov / (ss.sqrt() * y_ss.sqrt());
        let column = ScreenColumn {
            name: name.clone(),
            index: j,
            correlation,
        };
        if correlation.abs() >= cfg.threshold {
            kept.push(column);
        } else {
            dropped.push(column);
        }
    }

    let keep_indices: Vec<usize> = kept.iter().map(|c| c.index).collect();
    let reduced = io::render_csv(&table, &keep_indices);
    let report = ScreenReport {
        n: data.n(),
        p: data.p(),
        threshold: cfg.threshold,
        kept,
        dropped,
        zero_variance,
    };

    let mut summary = format!(
        "kept {}/{} covariates at |corr| >= {} (reduced dataset: screen_reduced.csv)",
        report.kept.len(),
        report.p,
        cfg.threshold
    );
    if !report.zero_variance.is_empty() {
        let _ = write!(
            summary,
            "\nwarning: {} zero-variance column(s) excluded: {}",
            report.zero_variance.len(),
            report.zero_variance.join(" ")
        );
    }

    Ok(CommandOutput {
        files: vec![
            ("screen_reduced.csv".to_string(), reduced.into_bytes()),
            ("screen_report.json".to_string(), to_json_bytes(&report)?),
        ],
        summary,
        seeds: BTreeMap::new(),
        inputs: vec![cfg.input.clone()],
    })
}

// ---------------------------------------------------------------------------
// simulate

/// A simulate config embeds the fully resolved scenario, so a replay never
/// re-reads preset tables or scenario files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub scenario: Scenario,
    pub workers: usize,
}

pub fn exec_simulate(cfg: &SimulateConfig) -> Result<CommandOutput> {
    let report = alasso::run_coverage_study_with_workers(&cfg.scenario, cfg.workers)?;
    let table = report.text_table();
    let mut seeds = BTreeMap::new();
    seeds.insert("scenario".to_string(), cfg.scenario.seed);
    Ok(CommandOutput {
        files: vec![
            ("simulate_report.json".to_string(), to_json_bytes(&report)?),
            ("simulate_table.txt".to_string(), table.clone().into_bytes()),
        ],
        summary: table.trim_end().to_string(),
        seeds,
        inputs: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// diagnose

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DiagnoseSource {
    /// One generated replicate of a built-in scenario, checked at the true
    /// support with the generating coefficients.
    Preset { name: String, rep: usize },
    /// A CSV dataset, checked at the fitted model's active set.
    Csv {
        #[serde(flatten)]
        fit: FitConfig,
        coordinate: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseConfig {
    #[serde(flatten)]
    pub source: DiagnoseSource,
    /// Eigenvalue-decay exponent for the finite-n surrogates.
    pub exponent_a: f64,
    /// Signal-decay exponent.
    pub exponent_b: f64,
    /// Slack for the conditions' existential delta.
    pub delta: f64,
}

#[derive(Serialize)]
struct DiagnoseReport {
    source: String,
    support: Vec<usize>,
    report: alasso::ConditionReport,
}

pub fn exec_diagnose(cfg: &DiagnoseConfig) -> Result<CommandOutput> {
    let (report, source_desc, support, n, inputs, seeds) = match &cfg.source {
        DiagnoseSource::Preset { name, rep } => {
            let sc = alasso::preset(name)?;
            let data = alasso::generate_scenario_data(&sc, *rep, sc.seed)?;
            let support = sc.support();
            let rows: Vec<Vec<f64>> = sc
                .targets
                .iter()
                .map(|&t| {
                    let mut row = vec![0.0; sc.p];
                    row[t] = 1.0;
                    row
                })
                .collect();
            let pivot = PivotSpec::new(Matrix::from_rows(&rows)?, PivotKind::Raw)?;
            let lambda_rule = match &sc.tuning {
                alasso::Tuning::Theoretical { lambda, .. } => Some(lambda / RULE_TO_PENALTY),
                alasso::Tuning::CrossValidated { .. } => None,
            };
            let mut inputs_c = ConditionInputs::new(cfg.exponent_a, cfg.exponent_b, sc.gamma)
                .with_delta(cfg.delta);
            if let Some(l) = lambda_rule {
                inputs_c = inputs_c.with_lambda(l);
            }
            let report = condition_report(
                &data,
                &support,
                &pivot,
                Some(&sc.beta_true),
                None,
                SupportMode::True,
                &inputs_c,
            )?;
            let mut seeds = BTreeMap::new();
            seeds.insert("scenario".to_string(), sc.seed);
            (
                report,
                format!("preset {name} (replicate {rep}, true support)"),
                support,
                sc.n,
                Vec::new(),
                seeds,
            )
        }
        DiagnoseSource::Csv { fit, coordinate } => {
            let prep = prepare_fit(fit)?;
            let j = prep.table.resolve_coordinate(coordinate)?;
            let pivot = PivotSpec::coordinate(j, prep.data.p(), PivotKind::Raw)?;
            let inputs_c = ConditionInputs::new(cfg.exponent_a, cfg.exponent_b, fit.gamma)
                .with_delta(cfg.delta)
                .with_lambda(prep.lambda_rule);
            let report = condition_report(
                &prep.data,
                &prep.fit.active_set,
                &pivot,
                Some(&prep.fit.beta_hat),
                Some(&prep.fit.centered_residuals),
                SupportMode::Estimated,
                &inputs_c,
            )?;
            let n = prep.data.n();
            (
                report,
                format!(
                    "{} (estimated active set)",
                    fit.input.display()
                ),
                prep.fit.active_set.clone(),
                n,
                vec![fit.input.clone()],
                fit_seeds(fit),
            )
        }
    };

    let mut summary = format!("conditions for {source_desc}\n");
    let _ = writeln!(
        summary,
        "support size {}, eta_11n={:.6}, eta_n={:.6}, c1_delta={:.6}",
        support.len(),
        report.eta_11n,
        report.eta_n,
        report.c1_delta
    );
    let _ = writeln!(
        summary,
        "c6 window for lambda/sqrt(n): [{:.6}, {:.6}]{}",
        report.c6_window.lower,
        report.c6_window.upper,
        match report.inputs.lambda {
            Some(l) => {
                let position = l / (n as f64).sqrt();
                let verdict = if report.c6_window.contains(position) {
                    "inside"
                } else {
                    "outside"
                };
                format!(" — lambda gives {position:.6} ({verdict})")
            }
            None => String::new(),
        }
    );
    for (name, verdict) in &report.verdicts {
        let _ = writeln!(summary, "{name}: {verdict:?}");
    }

    let wrapped = DiagnoseReport {
        source: source_desc,
        support,
        report,
    };
    Ok(CommandOutput {
        files: vec![(
            "diagnose_report.json".to_string(),
            to_json_bytes(&wrapped)?,
        )],
        summary: summary.trim_end().to_string(),
        seeds,
        inputs,
    })
}

// ---------------------------------------------------------------------------
// edgeworth

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeworthConfig {
    #[serde(flatten)]
    pub fit: FitConfig,
    pub coordinate: String,
    pub grid_min: f64,
    pub grid_max: f64,
    pub points: usize,
}

#[derive(Serialize)]
struct EdgeworthReport {
    coordinate: usize,
    coordinate_name: String,
    spec: EdgeworthSpec,
    /// Total probability mass of each expansion over the padded grid span
    /// (a sanity indicator; both should be close to 1).
    psi_mass: f64,
    pi_mass: f64,
    grid: Vec<f64>,
    psi: Vec<f64>,
    pi: Vec<f64>,
    /// Correction-free Gaussian reference densities at the expansions'
    /// respective variances.
    gauss_raw: Vec<f64>,
    gauss_student: Vec<f64>,
}

pub fn exec_edgeworth(cfg: &EdgeworthConfig) -> Result<CommandOutput> {
    if !(cfg.grid_max > cfg.grid_min) || cfg.points < 2 {
        return Err(CliError::Lib(alasso::Error::ParameterOutOfRange {
            name: "grid",
            value: cfg.points as f64,
            range: "grid_max > grid_min with at least 2 points",
        }));
    }
    let prep = prepare_fit(&cfg.fit)?;
    let j = prep.table.resolve_coordinate(&cfg.coordinate)?;
    let pivot = PivotSpec::coordinate(j, prep.data.p(), PivotKind::Raw)?;
    let spec = alasso::edgeworth::plugin_spec(&prep.data, &prep.fit, prep.fit.lambda / 2.0, &pivot)?;

    let grid: Vec<f64> = (0..cfg.points)
        .map(|i| {
            cfg.grid_min + (cfg.grid_max - cfg.grid_min) * i as f64 / (cfg.points - 1) as f64
        })
        .collect();
    let psi: Vec<f64> = grid.iter().map(|&x| alasso::psi_density(x, &spec)).collect();
    let pi: Vec<f64> = grid.iter().map(|&x| alasso::pi_density(x, &spec)).collect();
    let v_raw = spec.sigma_sq * spec.upsilon_breve;
    let v_student = spec.upsilon_breve;
    let gauss = |x: f64, v: f64| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let gauss_raw: Vec<f64> = grid.iter().map(|&x| gauss(x, v_raw)).collect();
    let gauss_student: Vec<f64> = grid.iter().map(|&x| gauss(x, v_student)).collect();

    let psi_mass = alasso::ee_cdf(EeKind::Psi, &spec, f64::NEG_INFINITY, f64::INFINITY)?;
    let pi_mass = alasso::ee_cdf(EeKind::Pi, &spec, f64::NEG_INFINITY, f64::INFINITY)?;

    let mut table = String::from("x,psi,pi,gauss_raw,gauss_student\n");
    for (i, &x) in grid.iter().enumerate() {
        let _ = writeln!(
            table,
            "{},{},{},{},{}",
            io::format_f64(x),
            io::format_f64(psi[i]),
            io::format_f64(pi[i]),
            io::format_f64(gauss_raw[i]),
            io::format_f64(gauss_student[i])
        );
    }

    let report = EdgeworthReport {
        coordinate: j,
        coordinate_name: prep.table.covariate_names[j].clone(),
        spec,
        psi_mass,
        pi_mass,
        grid,
        psi,
        pi,
        gauss_raw,
        gauss_student,
    };
    let summary = format!(
        "expansion densities for {} over [{}, {}] ({} points)\nf_n={:.6}, r1={}, sigma_sq={:.6}, mu3={:.6}\nmass: psi {:.8}, pi {:.8}",
        report.coordinate_name,
        cfg.grid_min,
        cfg.grid_max,
        cfg.points,
        report.spec.f_n,
        report.spec.r1,
        report.spec.sigma_sq,
        report.spec.mu3,
        report.psi_mass,
        report.pi_mass
    );

    Ok(CommandOutput {
        files: vec![
            ("edgeworth_report.json".to_string(), to_json_bytes(&report)?),
            ("edgeworth_table.csv".to_string(), table.into_bytes()),
        ],
        summary,
        seeds: fit_seeds(&cfg.fit),
        inputs: vec![cfg.fit.input.clone()],
    })
}
