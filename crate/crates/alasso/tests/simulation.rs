//! Coverage-harness tests: data generation, determinism, degenerate runs,
//! and desk-scale reproduction of the reference coverage numbers.

use alasso::simulation::{
    generate_scenario_data, preset, run_coverage_study, run_coverage_study_with_workers,
    DesignSpec, Scenario, Tuning,
};
use alasso::{CiMethod, Error, IntervalSide};

/// Small scenario for fast structural tests: case-(a) shape at reduced
/// replication.
fn small_scenario() -> Scenario {
    let mut sc = preset("a").unwrap();
    sc.mc_reps = 25;
    sc.b = 150;
    sc
}

#[test]
fn preset_names_round_trip() {
    for name in alasso::PRESET_NAMES {
        let sc = preset(name).unwrap();
        assert_eq!(sc.name, name);
        sc.validate().unwrap();
    }
    assert!(matches!(preset("z"), Err(Error::UnknownPreset(_))));
}

#[test]
fn preset_a_materializes_reference_parameterization() {
    let sc = preset("a").unwrap();
    assert_eq!((sc.n, sc.p, sc.p0), (60, 10, 5));
    assert_eq!(&sc.beta_true[..5], &[4.0, -1.5, -8.0, 0.9, -3.0]);
    assert!(sc.beta_true[5..].iter().all(|&b| b == 0.0));
    assert_eq!(sc.design, DesignSpec::ArBlock { rho: 0.3 });
    // Fourth-root rule 2 n^{1/4} in solver units (doubled).
    match &sc.tuning {
        Tuning::Theoretical { lambda, lambda1 } => {
            assert!((lambda - 2.0 * 2.0 * 60f64.powf(0.25)).abs() < 1e-12);
            assert!(lambda1.is_none());
        }
        other => panic!("preset a should be theoretical, got {other:?}"),
    }
}

#[test]
fn generated_data_is_deterministic_per_seed_and_replicate() {
    let sc = small_scenario();
    let d1 = generate_scenario_data(&sc, 7, sc.seed).unwrap();
    let d2 = generate_scenario_data(&sc, 7, sc.seed).unwrap();
    assert_eq!(d1.x().as_slice(), d2.x().as_slice());
    assert_eq!(d1.y(), d2.y());
    let d3 = generate_scenario_data(&sc, 8, sc.seed).unwrap();
    assert_ne!(d1.y(), d3.y());
    let d4 = generate_scenario_data(&sc, 7, sc.seed + 1).unwrap();
    assert_ne!(d1.y(), d4.y());
}

#[test]
fn generated_block_covariance_matches_the_design() {
    // Law-of-large-numbers check on the AR block: adjacent-column sample
    // covariance over many rows approaches 0.3.
    let mut sc = small_scenario();
    sc.n = 100_000;
    let data = generate_scenario_data(&sc, 0, 20_260_815).unwrap();
    let n = data.n() as f64;
    let col0 = data.x().col(0);
    let col1 = data.x().col(1);
    let mean0 = col0.iter().sum::<f64>() / n;
    let mean1 = col1.iter().sum::<f64>() / n;
    let cov = col0
        .iter()
        .zip(&col1)
        .map(|(a, b)| (a - mean0) * (b - mean1))
        .sum::<f64>()
        / n;
    assert!(
        (cov - 0.3).abs() < 0.01,
        "sample covariance {cov} should approach 0.3"
    );
}

#[test]
fn noiseless_scenario_degenerates_cleanly() {
    // sigma = 0 leaves nothing to resample: every interval is the point
    // estimate. True zero coordinates are recovered exactly, so their point
    // intervals cover; penalized nonzero estimates are biased off the truth.
    let mut sc = small_scenario();
    sc.error_sigma = 0.0;
    sc.mc_reps = 5;
    sc.targets = vec![0, 7];
    let report = run_coverage_study(&sc).unwrap();
    assert_eq!(report.replicates_used, 5);
    for cell in &report.cells {
        assert_eq!(cell.avg_length, 0.0, "degenerate intervals have length 0");
        if cell.coordinate == 7 {
            assert_eq!(cell.coverage, 1.0, "exact zero recovery covers");
        } else {
            assert_eq!(cell.coverage, 0.0, "penalty bias moves the point off 4.0");
        }
    }
}

#[test]
fn report_is_identical_across_worker_counts() {
    let mut sc = small_scenario();
    sc.mc_reps = 8;
    let sequential = run_coverage_study(&sc).unwrap();
    let parallel = run_coverage_study_with_workers(&sc, 4).unwrap();
    let a = serde_json::to_string(&sequential).unwrap();
    let b = serde_json::to_string(&parallel).unwrap();
    assert_eq!(a, b, "aggregate must not depend on scheduling");
}

#[test]
fn report_round_trips_through_json() {
    let mut sc = small_scenario();
    sc.mc_reps = 4;
    let report = run_coverage_study(&sc).unwrap();
    let text = serde_json::to_string_pretty(&report).unwrap();
    let back: alasso::CoverageReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&report).unwrap());
}

#[test]
fn higher_level_intervals_nest_on_the_same_replicates() {
    // Same seed, same draws; only the quantiles differ, so per-cell coverage
    // at 95% dominates coverage at 90%.
    let mut lo = small_scenario();
    lo.mc_reps = 20;
    let mut hi = lo.clone();
    hi.level = 0.95;
    let r_lo = run_coverage_study(&lo).unwrap();
    let r_hi = run_coverage_study(&hi).unwrap();
    for (a, b) in r_lo.cells.iter().zip(&r_hi.cells) {
        assert!(
            b.coverage >= a.coverage - 1e-12,
            "{:?}/{:?}: 95% coverage {} under 90% coverage {}",
            a.method,
            a.side,
            b.coverage,
            a.coverage
        );
    }
}

#[test]
fn scenario_validation_rejects_malformed_inputs() {
    let base = small_scenario();

    let mut sc = base.clone();
    sc.p0 = 11;
    assert!(sc.validate().is_err());

    let mut sc = base.clone();
    sc.beta_true[2] = 0.0; // zero inside the declared support
    assert!(matches!(
        sc.validate(),
        Err(Error::ZeroTrueCoefficient { coordinate: 2 })
    ));

    let mut sc = base.clone();
    sc.beta_true[9] = 1.0; // support outside the leading block
    assert!(sc.validate().is_err());

    let mut sc = base.clone();
    sc.targets = vec![10];
    assert!(sc.validate().is_err());

    let mut sc = base.clone();
    sc.level = 1.0;
    assert!(sc.validate().is_err());

    // p > n without a LASSO penalty for the initial estimator.
    let mut sc = base.clone();
    sc.p = 100;
    sc.beta_true.resize(100, 0.0);
    assert!(matches!(sc.validate(), Err(Error::MissingInitialEstimate)));
}

#[test]
fn text_table_lists_every_scored_cell() {
    let mut sc = small_scenario();
    sc.mc_reps = 6;
    let report = run_coverage_study(&sc).unwrap();
    let table = report.text_table();
    assert!(table.contains("beta_1"));
    assert!(table.contains("beta_4"));
    assert!(table.contains("one-sided"));
    assert!(table.contains("two-sided"));
    for method in [
        CiMethod::PercentileT,
        CiMethod::StudentR,
        CiMethod::StudentRbreve,
        CiMethod::OracleNormal,
    ] {
        assert!(table.contains(&method.to_string()), "missing column {method}");
    }
}

#[test]
fn one_sided_cells_have_infinite_average_length() {
    let mut sc = small_scenario();
    sc.mc_reps = 4;
    let report = run_coverage_study(&sc).unwrap();
    for cell in &report.cells {
        match cell.side {
            IntervalSide::LowerBound => assert!(cell.avg_length.is_infinite()),
            _ => assert!(cell.avg_length.is_finite()),
        }
    }
}

/// Full desk-scale reproduction of the reference table for scenario (a).
/// Roughly ten minutes of single-core compute; run explicitly with
/// `cargo test --test simulation -- --ignored full_case_a --nocapture`.
#[test]
#[ignore]
fn full_case_a_reproduces_reference_coverages() {
    let sc = preset("a").unwrap();
    let report = run_coverage_study(&sc).unwrap();
    println!("{}", report.text_table());
    println!("runtime: {:.1?}", report.runtime);

    let two = IntervalSide::TwoSidedEqualTail;
    let cell = |m, s| report.cell(0, m, s).unwrap();
    // Reference two-sided coverages for the first coordinate: student-R
    // 0.918 +- 0.04, student-Rbreve 0.900 +- 0.04, oracle 0.158 +- 0.06.
    assert!((cell(CiMethod::StudentR, two).coverage - 0.918).abs() <= 0.04);
    assert!((cell(CiMethod::StudentRbreve, two).coverage - 0.900).abs() <= 0.04);
    assert!((cell(CiMethod::OracleNormal, two).coverage - 0.158).abs() <= 0.06);
}
