//! `alasso`: fit adaptive-LASSO models, bootstrap confidence intervals,
//! screen covariates, run coverage studies, and check design conditions.
//!
//! Every subcommand writes its machine-readable report(s) plus a run
//! manifest into `--output-dir`; `alasso replay` re-executes a manifest and
//! verifies the outputs are byte-identical. Exit codes: 0 success, 2 input
//! error, 3 numerical failure, 4 reproducibility budget exceeded.

mod error;
mod exec;
mod io;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use alasso::{CiMethod, IntervalSide, Standardize};

use error::{CliError, Result};
use exec::{CiConfig, DiagnoseConfig, DiagnoseSource, EdgeworthConfig, FitConfig, ScreenConfig,
    SimulateConfig};
use manifest::RunManifest;

fn parse_standardize(s: &str) -> std::result::Result<Standardize, String> {
    s.parse().map_err(|e: alasso::Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<CiMethod, String> {
    s.parse().map_err(|e: alasso::Error| e.to_string())
}

fn parse_side(s: &str) -> std::result::Result<IntervalSide, String> {
    s.parse().map_err(|e: alasso::Error| e.to_string())
}

#[derive(Parser)]
#[command(
    name = "alasso",
    version,
    about = "Adaptive-LASSO estimation with residual-bootstrap inference"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that fits a model.
#[derive(Args)]
struct FitArgs {
    /// Input CSV with a header row; every non-response column is a covariate.
    #[arg(long, env = "ALASSO_INPUT")]
    input: PathBuf,
    /// Response column name.
    #[arg(long, default_value = "y", env = "ALASSO_RESPONSE")]
    response: String,
    /// ALASSO penalty in the published tuning-rule convention (the solver
    /// criterion applies twice this value).
    #[arg(long, env = "ALASSO_LAMBDA", conflicts_with = "cv")]
    lambda: Option<f64>,
    /// LASSO penalty (rule convention) for the initial estimate; switches
    /// the initial estimator from OLS to LASSO, required when p > n.
    #[arg(long, env = "ALASSO_LAMBDA1")]
    lambda1: Option<f64>,
    /// Adaptive-weight exponent.
    #[arg(long, default_value_t = 1.0, env = "ALASSO_GAMMA")]
    gamma: f64,
    /// Choose lambda by K-fold cross-validation instead of --lambda.
    #[arg(long, env = "ALASSO_CV")]
    cv: bool,
    /// Cross-validation fold count.
    #[arg(long, default_value_t = 5, env = "ALASSO_FOLDS")]
    folds: usize,
    /// Cross-validation grid size (log-spaced).
    #[arg(long, default_value_t = 50, env = "ALASSO_GRID_POINTS")]
    grid_points: usize,
    /// Adaptive-weight stabilizer a_n; defaults to n^{-1/2}. Pass 0 for raw
    /// inverse-initial weights.
    #[arg(long, env = "ALASSO_STABILIZER")]
    stabilizer: Option<f64>,
    /// Column standardization: unitnorm, unitsd, or none.
    #[arg(
        long,
        default_value = "unitnorm",
        value_parser = parse_standardize,
        env = "ALASSO_STANDARDIZE"
    )]
    standardize: Standardize,
    /// Also divide the centered response by its sample standard deviation.
    #[arg(long, env = "ALASSO_RESPONSE_SCALE")]
    response_scale: bool,
    /// Master RNG seed (cross-validation folds, bootstrap resampling).
    #[arg(long, default_value_t = 0, env = "ALASSO_SEED")]
    seed: u64,
}

impl FitArgs {
    fn into_config(self) -> FitConfig {
        FitConfig {
            input: self.input,
            response: self.response,
            lambda: self.lambda,
            lambda1: self.lambda1,
            gamma: self.gamma,
            cv: self.cv,
            folds: self.folds,
            grid_points: self.grid_points,
            stabilizer: self.stabilizer,
            standardize: self.standardize,
            response_scale: self.response_scale,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Directory receiving the report(s) and run manifest.
    #[arg(long, default_value = ".", env = "ALASSO_OUTPUT_DIR")]
    output_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an adaptive-LASSO model to a CSV dataset.
    Fit {
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Fit a model and report one bootstrap or oracle confidence interval.
    Ci {
        #[command(flatten)]
        fit: FitArgs,
        /// Covariate to cover: 0-based index or header name.
        #[arg(long, env = "ALASSO_COORDINATE")]
        coordinate: String,
        /// Interval construction: percentile-T, student-R, student-Rbreve,
        /// or oracle-normal.
        #[arg(
            long,
            default_value = "student-R",
            value_parser = parse_method,
            env = "ALASSO_METHOD"
        )]
        method: CiMethod,
        /// Confidence level in (0, 1).
        #[arg(long, default_value_t = 0.9, env = "ALASSO_LEVEL")]
        level: f64,
        /// Interval side: two-sided, symmetric, lower-bound, or upper-bound.
        #[arg(
            long,
            default_value = "two-sided",
            value_parser = parse_side,
            env = "ALASSO_SIDE"
        )]
        side: IntervalSide,
        /// Bootstrap replicates.
        #[arg(long, default_value_t = 500, env = "ALASSO_B")]
        b: usize,
        /// Worker threads for the bootstrap loop (schedule-invariant).
        #[arg(long, default_value_t = 1, env = "ALASSO_WORKERS")]
        workers: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Keep covariates whose absolute correlation with the response clears
    /// a threshold; writes the reduced dataset.
    Screen {
        /// Input CSV with a header row.
        #[arg(long, env = "ALASSO_INPUT")]
        input: PathBuf,
        /// Response column name.
        #[arg(long, default_value = "y", env = "ALASSO_RESPONSE")]
        response: String,
        /// Minimum |corr(y, x_j)| a covariate must reach.
        #[arg(long, default_value_t = 0.5, env = "ALASSO_THRESHOLD")]
        threshold: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run a Monte Carlo coverage study from a preset or scenario file.
    Simulate {
        /// Built-in scenario: a, b, c, d, minnier, or minnier5.
        #[arg(
            long,
            conflicts_with = "scenario",
            required_unless_present = "scenario",
            env = "ALASSO_PRESET"
        )]
        preset: Option<String>,
        /// Scenario JSON file (the format embedded in simulate manifests).
        #[arg(long, env = "ALASSO_SCENARIO")]
        scenario: Option<PathBuf>,
        /// Override the scenario's Monte Carlo replicate count.
        #[arg(long, env = "ALASSO_MC")]
        mc: Option<usize>,
        /// Override the scenario's bootstrap replicate count.
        #[arg(long, env = "ALASSO_B")]
        b: Option<usize>,
        /// Override the scenario's master seed.
        #[arg(long, env = "ALASSO_SEED")]
        seed: Option<u64>,
        /// Worker threads across replicates (schedule-invariant).
        #[arg(long, default_value_t = 1, env = "ALASSO_WORKERS")]
        workers: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Check the design/penalty conditions behind the inference guarantees.
    Diagnose {
        /// Diagnose one generated replicate of a built-in scenario at its
        /// true support.
        #[arg(
            long,
            conflicts_with = "input",
            required_unless_present = "input",
            env = "ALASSO_PRESET"
        )]
        preset: Option<String>,
        /// Replicate index for preset data generation.
        #[arg(long, default_value_t = 0, env = "ALASSO_REP")]
        rep: usize,
        /// Diagnose a CSV dataset at a fitted model's active set (requires
        /// --lambda; cross-validation is not available here).
        #[arg(long, env = "ALASSO_INPUT")]
        input: Option<PathBuf>,
        /// Response column name (CSV mode).
        #[arg(long, default_value = "y", env = "ALASSO_RESPONSE")]
        response: String,
        /// ALASSO penalty in rule convention (CSV mode).
        #[arg(long, env = "ALASSO_LAMBDA")]
        lambda: Option<f64>,
        /// Initial-LASSO penalty in rule convention (CSV mode, p > n).
        #[arg(long, env = "ALASSO_LAMBDA1")]
        lambda1: Option<f64>,
        /// Adaptive-weight exponent.
        #[arg(long, default_value_t = 1.0, env = "ALASSO_GAMMA")]
        gamma: f64,
        /// Adaptive-weight stabilizer (CSV mode); defaults to n^{-1/2}.
        #[arg(long, env = "ALASSO_STABILIZER")]
        stabilizer: Option<f64>,
        /// Column standardization (CSV mode).
        #[arg(
            long,
            default_value = "unitnorm",
            value_parser = parse_standardize,
            env = "ALASSO_STANDARDIZE"
        )]
        standardize: Standardize,
        /// Also scale the centered response (CSV mode).
        #[arg(long, env = "ALASSO_RESPONSE_SCALE")]
        response_scale: bool,
        /// Contrast coordinate for the asymptotic-scale check (CSV mode).
        #[arg(long, default_value = "0", env = "ALASSO_COORDINATE")]
        coordinate: String,
        /// Eigenvalue-decay exponent in the finite-n surrogates.
        #[arg(long, default_value_t = 0.0, env = "ALASSO_EXPONENT_A")]
        exponent_a: f64,
        /// Signal-decay exponent in the finite-n surrogates.
        #[arg(long, default_value_t = 0.0, env = "ALASSO_EXPONENT_B")]
        exponent_b: f64,
        /// Slack for the conditions' existential delta.
        #[arg(long, default_value_t = 0.1, env = "ALASSO_DELTA")]
        delta: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Tabulate the Edgeworth-type expansion densities for one coordinate's
    /// pivots on a fitted model.
    Edgeworth {
        #[command(flatten)]
        fit: FitArgs,
        /// Covariate whose pivot densities to tabulate.
        #[arg(long, default_value = "0", env = "ALASSO_COORDINATE")]
        coordinate: String,
        /// Lower grid endpoint.
        #[arg(
            long,
            default_value_t = -6.0,
            allow_hyphen_values = true,
            env = "ALASSO_GRID_MIN"
        )]
        grid_min: f64,
        /// Upper grid endpoint.
        #[arg(
            long,
            default_value_t = 6.0,
            allow_hyphen_values = true,
            env = "ALASSO_GRID_MAX"
        )]
        grid_max: f64,
        /// Grid point count.
        #[arg(long, default_value_t = 241, env = "ALASSO_POINTS")]
        points: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Re-run a command from its manifest and verify the outputs are
    /// byte-identical.
    Replay {
        /// Manifest written by a previous run.
        #[arg(long, env = "ALASSO_MANIFEST")]
        manifest: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(hint) = e.hint() {
                eprintln!("hint: {hint}");
            }
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(command: Command) -> Result<String> {
    match command {
        Command::Fit { fit, out } => run_fresh("fit", &fit.into_config(), &out.output_dir),
        Command::Ci {
            fit,
            coordinate,
            method,
            level,
            side,
            b,
            workers,
            out,
        } => {
            let cfg = CiConfig {
                fit: fit.into_config(),
                coordinate,
                method,
                level,
                side,
                b,
                workers,
            };
            run_fresh("ci", &cfg, &out.output_dir)
        }
        Command::Screen {
            input,
            response,
            threshold,
            out,
        } => {
            let cfg = ScreenConfig {
                input,
                response,
                threshold,
            };
            run_fresh("screen", &cfg, &out.output_dir)
        }
        Command::Simulate {
            preset,
            scenario,
            mc,
            b,
            seed,
            workers,
            out,
        } => {
            let mut sc = match (&preset, &scenario) {
                (Some(name), None) => alasso::preset(name)?,
                (None, Some(path)) => {
                    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    serde_json::from_slice::<alasso::Scenario>(&bytes)?
                }
                // clap enforces exactly one source.
                _ => unreachable!("clap enforces one scenario source"),
            };
            if let Some(mc) = mc {
                sc.mc_reps = mc;
            }
            if let Some(b) = b {
                sc.b = b;
            }
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let cfg = SimulateConfig {
                preset,
                scenario: sc,
                workers,
            };
            run_fresh("simulate", &cfg, &out.output_dir)
        }
        Command::Diagnose {
            preset,
            rep,
            input,
            response,
            lambda,
            lambda1,
            gamma,
            stabilizer,
            standardize,
            response_scale,
            coordinate,
            exponent_a,
            exponent_b,
            delta,
            out,
        } => {
            let source = match (preset, input) {
                (Some(name), None) => DiagnoseSource::Preset { name, rep },
                (None, Some(path)) => DiagnoseSource::Csv {
                    fit: FitConfig {
                        input: path,
                        response,
                        lambda,
                        lambda1,
                        gamma,
                        cv: false,
                        folds: 5,
                        grid_points: 50,
                        stabilizer,
                        standardize,
                        response_scale,
                        seed: 0,
                    },
                    coordinate,
                },
                _ => unreachable!("clap enforces one diagnose source"),
            };
            let cfg = DiagnoseConfig {
                source,
                exponent_a,
                exponent_b,
                delta,
            };
            run_fresh("diagnose", &cfg, &out.output_dir)
        }
        Command::Edgeworth {
            fit,
            coordinate,
            grid_min,
            grid_max,
            points,
            out,
        } => {
            let cfg = EdgeworthConfig {
                fit: fit.into_config(),
                coordinate,
                grid_min,
                grid_max,
                points,
            };
            run_fresh("edgeworth", &cfg, &out.output_dir)
        }
        Command::Replay { manifest, out } => run_replay(&manifest, &out.output_dir),
    }
}

fn run_fresh<T: serde::Serialize>(command: &str, cfg: &T, out_dir: &Path) -> Result<String> {
    let run = run_command(command, serde_json::to_value(cfg)?, out_dir)?;
    Ok(run.summary)
}

struct FinishedRun {
    summary: String,
    output_checksums: BTreeMap<String, String>,
}

/// Executes a command from its serialized config, writes outputs plus the
/// manifest under `out_dir`, and reports the output checksums.
fn run_command(command: &str, config: serde_json::Value, out_dir: &Path) -> Result<FinishedRun> {
    let start = Instant::now();
    let output = match command {
        "fit" => exec::exec_fit(&serde_json::from_value(config.clone())?)?,
        "ci" => exec::exec_ci(&serde_json::from_value(config.clone())?)?,
        "screen" => exec::exec_screen(&serde_json::from_value(config.clone())?)?,
        "simulate" => exec::exec_simulate(&serde_json::from_value(config.clone())?)?,
        "diagnose" => exec::exec_diagnose(&serde_json::from_value(config.clone())?)?,
        "edgeworth" => exec::exec_edgeworth(&serde_json::from_value(config.clone())?)?,
        other => return Err(CliError::Replay(format!("unknown command `{other}`"))),
    };

    let mut run_manifest = RunManifest::new(
        command,
        config,
        output.seeds.clone(),
        start.elapsed().as_millis() as u64,
    );
    for input in &output.inputs {
        run_manifest.record_input(input)?;
    }
    for (name, bytes) in &output.files {
        let path = manifest::prepare_output(out_dir, name)?;
        std::fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
        run_manifest.record_output(name, bytes);
    }
    let manifest_path =
        manifest::prepare_output(out_dir, &manifest::manifest_name(command))?;
    run_manifest.write(&manifest_path)?;

    Ok(FinishedRun {
        summary: output.summary,
        output_checksums: run_manifest.output_checksums,
    })
}

fn run_replay(manifest_path: &Path, out_dir: &Path) -> Result<String> {
    let original = RunManifest::read(manifest_path)?;
    original.verify_inputs()?;
    let fresh = run_command(&original.command, original.config.clone(), out_dir)?;

    let mut mismatched = Vec::new();
    for (name, expected) in &original.output_checksums {
        if fresh.output_checksums.get(name) != Some(expected) {
            mismatched.push(name.clone());
        }
    }
    if mismatched.is_empty() {
        Ok(format!(
            "replayed `{}`: {} output file(s) byte-identical",
            original.command,
            original.output_checksums.len()
        ))
    } else {
        for name in &mismatched {
            eprintln!("replay mismatch: {name}");
        }
        Err(CliError::ReplayMismatch {
            outputs: mismatched.len(),
            total: original.output_checksums.len(),
        })
    }
}
