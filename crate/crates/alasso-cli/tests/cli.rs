//! End-to-end tests that drive the compiled `alasso` binary: fits checked
//! against hand arithmetic, interval construction, screening, the simulation
//! harness, condition diagnostics, manifest replay, and the exit-code
//! taxonomy for malformed inputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn alasso() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alasso"))
}

fn run(args: &[&str]) -> Output {
    alasso().args(args).output().expect("binary should run")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed (status {:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process should exit, not signal")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(dir: &Path, name: &str) -> Value {
    let bytes = fs::read(dir.join(name))
        .unwrap_or_else(|e| panic!("missing output `{name}`: {e}"));
    serde_json::from_slice(&bytes).expect("output should be valid JSON")
}

fn write_csv(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

/// Repository-level fixture under `data/`.
fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn f64_at<'a>(v: &'a Value, pointer: &str) -> f64 {
    v.pointer(pointer)
        .and_then(Value::as_f64)
        .unwrap_or_else(|| panic!("missing numeric field `{pointer}` in {v:#}"))
}

fn str_vec(v: &Value, pointer: &str) -> Vec<String> {
    v.pointer(pointer)
        .and_then(Value::as_array)
        .unwrap_or_else(|| panic!("missing array `{pointer}`"))
        .iter()
        .map(|s| s.as_str().unwrap().to_string())
        .collect()
}

/// Four orthogonal +/-1 rows in two covariates; the Gram matrix is exactly
/// the identity, so every penalized quantity has a closed form.
const ORTHOGONAL_CSV: &str = "\
x1,x2,y
1,1,2
1,-1,0.5
-1,1,-0.5
-1,-1,-1.5
";

// --- fit ---

#[test]
fn fit_with_negligible_penalty_matches_hand_ols() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "toy.csv", "x1,x2,y\n1,0,1\n1,1,2\n1,2,2\n");
    let out = run(&[
        "fit",
        csv.to_str().unwrap(),
        "--standardize",
        "none",
        "--stabilizer",
        "0",
        "--lambda",
        "1e-9",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);

    // Normal equations by hand: X'X = [[3,3],[3,5]], X'y = [5,7].
    let report = read_json(dir.path(), "fit_report.json");
    assert!((f64_at(&report, "/coefficients/0") - 7.0 / 6.0).abs() < 1e-6);
    assert!((f64_at(&report, "/coefficients/1") - 0.5).abs() < 1e-6);
    // No standardization, so the original-scale view is the same fit plus a
    // zero intercept.
    assert!((f64_at(&report, "/original_scale/coefficients/0") - 7.0 / 6.0).abs() < 1e-6);
    assert!(f64_at(&report, "/original_scale/intercept").abs() < 1e-6);
    assert_eq!(report["n"], 3);
    assert_eq!(report["converged"], true);
}

#[test]
fn fit_reads_lambda_from_environment() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "toy.csv", "x1,x2,y\n1,0,1\n1,1,2\n1,2,2\n");
    let out = alasso()
        .env("ALASSO_LAMBDA", "1e-9")
        .args([
            "fit",
            csv.to_str().unwrap(),
            "--standardize",
            "none",
            "--output-dir",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_ok(&out);
    let report = read_json(dir.path(), "fit_report.json");
    assert!((f64_at(&report, "/lambda_rule") - 1e-9).abs() < 1e-24);
}

#[test]
fn fit_rejects_non_numeric_cell_naming_its_position() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "bad.csv", "x1,x2,y\n1,0,1\n1,abc,2\n");
    let out = run(&[
        "fit",
        csv.to_str().unwrap(),
        "--lambda",
        "1",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let msg = stderr_text(&out);
    assert!(msg.contains("line 3"), "stderr was: {msg}");
    assert!(msg.contains("x2"), "stderr was: {msg}");
    assert!(msg.contains("abc"), "stderr was: {msg}");
}

#[test]
fn fit_rejects_missing_response_column() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "toy.csv", "x1,x2,y\n1,0,1\n1,1,2\n");
    let out = run(&[
        "fit",
        csv.to_str().unwrap(),
        "--response",
        "outcome",
        "--lambda",
        "1",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("outcome"));
}

/// The prostate training fit is pinned against an independently computed
/// reference: soft-threshold arithmetic on the standardized normal equations
/// reproduces `beta(lcavol) = 0.6864932099449285` with active set
/// {lcavol, lweight, svi} at this penalty.
#[test]
fn fit_reproduces_prostate_training_reference() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "fit",
        data_file("prostate_train.csv").to_str().unwrap(),
        "--response",
        "lpsa",
        "--standardize",
        "unitsd",
        "--stabilizer",
        "0",
        "--lambda",
        "3.138288992714996",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read_json(dir.path(), "fit_report.json");
    assert_eq!(
        str_vec(&report, "/active_names"),
        vec!["lcavol", "lweight", "svi"]
    );
    let lcavol = f64_at(&report, "/coefficients/0");
    assert!(
        (lcavol - 0.6864932099449285).abs() < 1e-9,
        "lcavol coefficient drifted: {lcavol}"
    );
}

// --- ci ---

/// With the identity Gram every piece of the oracle interval is hand
/// computable: the estimate comes from one soft-threshold per coordinate and
/// the plug-in standard error is `sigma_hat / sqrt(n)`.
#[test]
fn oracle_interval_matches_hand_normal_arithmetic() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "orth.csv", ORTHOGONAL_CSV);
    let out = run(&[
        "ci",
        csv.to_str().unwrap(),
        "--coordinate",
        "x1",
        "--method",
        "oracle-normal",
        "--level",
        "0.9",
        "--standardize",
        "none",
        "--stabilizer",
        "0",
        "--lambda",
        "0.6",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read_json(dir.path(), "ci_report.json");

    // OLS on the orthogonal design: beta_tilde = X'y / 4 = [1.125, 0.625].
    // Soft-thresholding X'y at lambda_solver * w_j / 2 with w_j =
    // 1/|beta_tilde_j| and lambda_solver = 2 * 0.6 gives the fit below.
    let b1: f64 = (4.5 - 1.2 / (2.0 * 1.125)) / 4.0;
    let b2: f64 = (2.5 - 1.2 / (2.0 * 0.625)) / 4.0;
    assert!((b1 - 0.9916666666666667).abs() < 1e-15);
    assert!((b2 - 0.385).abs() < 1e-15);
    assert!((f64_at(&report, "/estimate") - b1).abs() < 1e-12);

    // Residual variance from those coefficients, then the normal interval
    // with the identity Gram: se = sigma_hat / sqrt(n).
    let x: [[f64; 2]; 4] = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
    let y = [2.0, 0.5, -0.5, -1.5];
    let resid: Vec<f64> = (0..4)
        .map(|i| y[i] - b1 * x[i][0] - b2 * x[i][1])
        .collect();
    let mean = resid.iter().sum::<f64>() / 4.0;
    let sigma_sq = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 4.0;
    let z = 1.6448536269514722; // 95th percentile of the standard normal
    let se = sigma_sq.sqrt() / 2.0;
    assert!((f64_at(&report, "/interval/lower") - (b1 - z * se)).abs() < 1e-10);
    assert!((f64_at(&report, "/interval/upper") - (b1 + z * se)).abs() < 1e-10);
}

#[test]
fn ci_with_fixed_seed_is_byte_identical_across_runs() {
    let args = |dir: &Path| {
        vec![
            "ci".to_string(),
            data_file("prostate_train.csv").to_str().unwrap().to_string(),
            "--response".into(),
            "lpsa".into(),
            "--coordinate".into(),
            "lcavol".into(),
            "--method".into(),
            "student-Rbreve".into(),
            "--b".into(),
            "50".into(),
            "--seed".into(),
            "11".into(),
            "--standardize".into(),
            "unitsd".into(),
            "--lambda".into(),
            "3.138288992714996".into(),
            "--output-dir".into(),
            dir.to_str().unwrap().to_string(),
        ]
    };
    let d1 = TempDir::new().unwrap();
    let d2 = TempDir::new().unwrap();
    assert_ok(&alasso().args(args(d1.path())).output().unwrap());
    assert_ok(&alasso().args(args(d2.path())).output().unwrap());
    let r1 = fs::read(d1.path().join("ci_report.json")).unwrap();
    let r2 = fs::read(d2.path().join("ci_report.json")).unwrap();
    assert_eq!(r1, r2, "same seed should reproduce the interval bytes");

    let report: Value = serde_json::from_slice(&r1).unwrap();
    assert_eq!(report["failed_replicates"], 0);
    assert!(f64_at(&report, "/interval/lower") < f64_at(&report, "/interval/upper"));
}

#[test]
fn ci_on_empty_active_set_exits_numerical_with_hint() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "orth.csv", ORTHOGONAL_CSV);
    let out = run(&[
        "ci",
        csv.to_str().unwrap(),
        "--coordinate",
        "0",
        "--method",
        "student-Rbreve",
        "--standardize",
        "none",
        "--lambda",
        "50",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3);
    assert!(stderr_text(&out).contains("lower --lambda"));
}

// --- screen ---

#[test]
fn screen_splits_columns_by_correlation_and_flags_constants() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(
        dir.path(),
        "mix.csv",
        "dup,noise,flat,y\n\
         1.0,0.3,7,1.0\n\
         2.0,-0.1,7,2.0\n\
         3.0,0.2,7,3.0\n\
         4.0,-0.4,7,4.0\n\
         5.0,0.1,7,5.0\n\
         6.0,-0.2,7,6.0\n",
    );
    let out = run(&[
        "screen",
        csv.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read_json(dir.path(), "screen_report.json");

    // `dup` is an affine copy of the response: correlation exactly 1.
    assert_eq!(report["kept"].as_array().unwrap().len(), 1);
    assert_eq!(report["kept"][0]["name"], "dup");
    assert!((f64_at(&report, "/kept/0/correlation") - 1.0).abs() < 1e-12);
    assert_eq!(report["dropped"][0]["name"], "noise");
    assert_eq!(str_vec(&report, "/zero_variance"), vec!["flat"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("flat"));

    // The reduced table keeps only survivors plus the response.
    let reduced = fs::read_to_string(dir.path().join("screen_reduced.csv")).unwrap();
    assert!(reduced.lines().next().unwrap().starts_with("dup,"));
    assert!(!reduced.contains("noise"));

    // Threshold zero admits every finite-variance column; the constant one
    // stays excluded because its correlation is undefined.
    let d0 = TempDir::new().unwrap();
    let out0 = run(&[
        "screen",
        csv.to_str().unwrap(),
        "--threshold",
        "0",
        "--output-dir",
        d0.path().to_str().unwrap(),
    ]);
    assert_ok(&out0);
    let report0 = read_json(d0.path(), "screen_report.json");
    assert_eq!(report0["kept"].as_array().unwrap().len(), 2);
    assert_eq!(str_vec(&report0, "/zero_variance"), vec!["flat"]);
}

/// The bundled p >> n expression fixture: marginal screening keeps 545 of
/// 1000 columns, and the penalized fit on the survivors selects six genes.
/// The interval machinery must then run with a LASSO initial estimate.
#[test]
fn microarray_screen_fit_interval_pipeline() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "screen",
        data_file("microarray_synthetic.csv").to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let screen = read_json(dir.path(), "screen_report.json");
    assert_eq!(screen["kept"].as_array().unwrap().len(), 545);

    let reduced = dir.path().join("screen_reduced.csv");
    let fit_dir = TempDir::new().unwrap();
    let out = run(&[
        "fit",
        reduced.to_str().unwrap(),
        "--lambda1",
        "2.7386127875258306",
        "--lambda",
        "1.170173659660358",
        "--standardize",
        "unitsd",
        "--response-scale",
        "--output-dir",
        fit_dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let fit = read_json(fit_dir.path(), "fit_report.json");
    let active = str_vec(&fit, "/active_names");
    assert_eq!(
        active,
        vec![
            "gene_0285", "gene_0341", "gene_0487", "gene_0546", "gene_0594",
            "gene_0805"
        ]
    );
    assert!((3..=12).contains(&active.len()));
    assert_eq!(fit["initial"], "lasso");

    let ci_dir = TempDir::new().unwrap();
    let out = run(&[
        "ci",
        reduced.to_str().unwrap(),
        "--coordinate",
        "gene_0341",
        "--method",
        "student-R",
        "--b",
        "60",
        "--seed",
        "3",
        "--lambda1",
        "2.7386127875258306",
        "--lambda",
        "1.170173659660358",
        "--standardize",
        "unitsd",
        "--response-scale",
        "--output-dir",
        ci_dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let ci = read_json(ci_dir.path(), "ci_report.json");
    assert_eq!(ci["failed_replicates"], 0);
    assert!(f64_at(&ci, "/interval/lower") < f64_at(&ci, "/interval/upper"));
}

#[test]
fn ci_without_lambda1_on_wide_data_hints_at_flag() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "fit",
        data_file("microarray_synthetic.csv").to_str().unwrap(),
        "--lambda",
        "1.17",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("--lambda1"));
}

// --- simulate ---

#[test]
fn simulate_unknown_preset_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "simulate",
        "--preset",
        "zz",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("zz"));
}

#[test]
fn simulate_same_seed_is_byte_identical_and_replays() {
    let args = |dir: &Path| {
        vec![
            "simulate",
            "--preset",
            "a",
            "--mc",
            "4",
            "--b",
            "50",
            "--seed",
            "9",
            "--output-dir",
            dir.to_str().unwrap(),
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    let d1 = TempDir::new().unwrap();
    let d2 = TempDir::new().unwrap();
    assert_ok(&alasso().args(args(d1.path())).output().unwrap());
    assert_ok(&alasso().args(args(d2.path())).output().unwrap());
    let r1 = fs::read(d1.path().join("simulate_report.json")).unwrap();
    let r2 = fs::read(d2.path().join("simulate_report.json")).unwrap();
    assert_eq!(r1, r2);

    // Replaying the recorded manifest reproduces every output byte for byte.
    let d3 = TempDir::new().unwrap();
    let out = run(&[
        "replay",
        d1.path().join("simulate_manifest.json").to_str().unwrap(),
        "--output-dir",
        d3.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("byte-identical"));
}

// --- diagnose ---

/// On a design with mutually orthogonal columns the support and its
/// complement are uncorrelated, so the identifiability separation is exactly
/// zero and the condition passes.
#[test]
fn diagnose_orthogonal_design_has_zero_separation() {
    let dir = TempDir::new().unwrap();
    // Three orthogonal +/-1 columns; the response loads on the first two
    // only, so the fitted support is a strict subset of the coordinates.
    let csv = write_csv(
        dir.path(),
        "orth3.csv",
        "x1,x2,x3,y\n\
         1,1,1,3\n\
         1,-1,-1,1\n\
         -1,1,-1,-1\n\
         -1,-1,1,-3\n",
    );
    let out = run(&[
        "diagnose",
        "--input",
        csv.to_str().unwrap(),
        "--standardize",
        "none",
        "--stabilizer",
        "1e-9",
        "--lambda",
        "0.25",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read_json(dir.path(), "diagnose_report.json");
    assert_eq!(report["support"], serde_json::json!([0, 1]));
    assert!(f64_at(&report, "/report/c1_delta").abs() < 1e-10);
    assert_eq!(report["report"]["verdicts"]["C.1"], "pass");
}

/// An exact duplicate of a support column sits in the complement span, which
/// drives the canonical correlation to 1 and fails identifiability. The OLS
/// initial estimate is singular here, so the LASSO initial is required.
#[test]
fn diagnose_duplicated_column_fails_identifiability() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(
        dir.path(),
        "dup.csv",
        "x1,x2,x3,y\n\
         1.0,1.0,0.2,1.1\n\
         2.0,2.0,-0.3,2.2\n\
         3.0,3.0,0.1,2.9\n\
         4.0,4.0,0.4,4.1\n\
         5.0,5.0,-0.2,4.8\n\
         6.0,6.0,0.3,6.2\n\
         7.0,7.0,-0.1,6.9\n\
         8.0,8.0,0.2,8.1\n",
    );
    // Without --lambda1 the singular OLS initial estimate is a hard error.
    let out = run(&[
        "diagnose",
        "--input",
        csv.to_str().unwrap(),
        "--standardize",
        "none",
        "--lambda",
        "1.0",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3);

    let out = run(&[
        "diagnose",
        "--input",
        csv.to_str().unwrap(),
        "--standardize",
        "none",
        "--lambda1",
        "1.0",
        "--lambda",
        "1.0",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read_json(dir.path(), "diagnose_report.json");
    assert!(f64_at(&report, "/report/c1_delta") > 0.999);
    assert_eq!(report["report"]["verdicts"]["C.1"], "fail");
}

/// Preset mode diagnoses one generated replicate against the scenario's true
/// support. The population design has smallest relevant-block eigenvalue
/// 0.5700406702665195; a single n=60 draw must land within three
/// across-replicate standard errors (0.074 each, measured at 2000 draws) of
/// it. The admissible penalty window depends only on population quantities
/// and is pinned exactly.
#[test]
fn diagnose_preset_matches_population_scale() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "diagnose",
        "--preset",
        "a",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read_json(dir.path(), "diagnose_report.json");
    let eta_11n = f64_at(&report, "/report/eta_11n");
    assert!(
        (eta_11n - 0.5700406702665195).abs() <= 3.0 * 0.074,
        "eta_11n = {eta_11n} is implausibly far from the population eigenvalue"
    );
    assert!((f64_at(&report, "/report/c6_window/lower") - 0.21736744788807766).abs() < 1e-9);
    assert!((f64_at(&report, "/report/c6_window/upper") - 1.3280513591135854).abs() < 1e-9);
    // The full Gram minimum cannot exceed its principal-submatrix minimum.
    assert!(f64_at(&report, "/report/eta_n") <= eta_11n + 1e-12);
}

// --- edgeworth ---

#[test]
fn edgeworth_expansions_integrate_to_one() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "edgeworth",
        data_file("prostate_train.csv").to_str().unwrap(),
        "--response",
        "lpsa",
        "--coordinate",
        "lcavol",
        "--standardize",
        "unitsd",
        "--lambda",
        "3.138288992714996",
        "--points",
        "201",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read_json(dir.path(), "edgeworth_report.json");
    assert!((f64_at(&report, "/psi_mass") - 1.0).abs() < 1e-6);
    assert!((f64_at(&report, "/pi_mass") - 1.0).abs() < 1e-6);
    assert_eq!(report["grid"].as_array().unwrap().len(), 201);

    // Header plus one row per grid point.
    let table = fs::read_to_string(dir.path().join("edgeworth_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 202);

    let bad = run(&[
        "edgeworth",
        data_file("prostate_train.csv").to_str().unwrap(),
        "--response",
        "lpsa",
        "--lambda",
        "3.14",
        "--grid-min",
        "2",
        "--grid-max",
        "-2",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&bad), 2);
}

// --- replay ---

#[test]
fn replay_reproduces_fit_and_rejects_changed_input() {
    let dir = TempDir::new().unwrap();
    let csv = write_csv(dir.path(), "toy.csv", "x1,x2,y\n1,0,1\n1,1,2\n1,2,2\n");
    let out = run(&[
        "fit",
        csv.to_str().unwrap(),
        "--standardize",
        "none",
        "--lambda",
        "0.1",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    let manifest = dir.path().join("fit_manifest.json");

    let replay_dir = TempDir::new().unwrap();
    let out = run(&[
        "replay",
        manifest.to_str().unwrap(),
        "--output-dir",
        replay_dir.path().to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert_eq!(
        fs::read(dir.path().join("fit_report.json")).unwrap(),
        fs::read(replay_dir.path().join("fit_report.json")).unwrap()
    );

    // Any edit to a recorded input must be caught before re-execution.
    let mut body = fs::read_to_string(&csv).unwrap();
    body.push_str("9,9,9\n");
    fs::write(&csv, body).unwrap();
    let out = run(&[
        "replay",
        manifest.to_str().unwrap(),
        "--output-dir",
        replay_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("has changed"));
}
