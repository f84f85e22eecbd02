//! Initial estimators (OLS, LASSO) and the adaptive-LASSO solver.
//!
//! The adaptive LASSO minimizes the weighted-l1 penalized criterion
//!
//! ```text
//! sum_i (y_i - x_i'b)^2 + lambda * sum_j w_j |b_j|,      w_j = (|bt_j| + a_n)^{-gamma}
//! ```
//!
//! where `bt` is an initial estimate (OLS when p <= n, LASSO otherwise) and
//! `a_n` is a small stabilizer that keeps the weights finite when the initial
//! estimate has exact zeros. Note the quadratic term is *not* halved; all
//! soft-threshold constants below carry the resulting factor 2 explicitly, so
//! a given lambda means the same thing here as in the tuning rules used by
//! the simulation presets (after their documented rescaling).
//!
//! The solver is cyclic coordinate descent with exact per-coordinate
//! minimization: each update soft-thresholds at `lambda * w_j / 2` divided by
//! the column's squared norm. A coordinate is active iff its minimizer is
//! exactly nonzero — no post-hoc rounding of small values.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{dot, least_squares, RngStream};

/// Hard iteration cap for coordinate descent (full cycles).
pub const MAX_CYCLES: usize = 10_000;
/// Convergence threshold on the sup-norm coefficient change per cycle.
pub const CONVERGENCE_TOL: f64 = 1e-10;

/// How the initial estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialEstimator {
    Ols,
    Lasso { lambda1: f64 },
}

/// An initial estimate for the adaptive-LASSO weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialEstimate {
    pub beta_tilde: Vec<f64>,
    pub method: InitialEstimator,
    /// Weight stabilizer `a_n`; `n^{-1/2}` by default, zero for theory-exact
    /// runs (in which case an exactly-zero initial component is an error).
    pub stabilizer: f64,
}

impl InitialEstimate {
    /// Same estimate with a different stabilizer (`0.0` is allowed).
    pub fn with_stabilizer(mut self, a_n: f64) -> Result<Self> {
        if !(a_n >= 0.0) {
            return Err(Error::ParameterOutOfRange {
                name: "a_n",
                value: a_n,
                range: "[0, inf)",
            });
        }
        self.stabilizer = a_n;
        Ok(self)
    }

    /// Penalty weights `(|bt_j| + a_n)^{-gamma}`.
    pub fn weights(&self, gamma: f64) -> Result<Vec<f64>> {
        self.beta_tilde
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let base = b.abs() + self.stabilizer;
                if base == 0.0 {
                    Err(Error::ZeroInitialComponent { coordinate: j })
                } else {
                    Ok(base.powf(-gamma))
                }
            })
            .collect()
    }
}

/// Default stabilizer for a sample of size n.
pub fn default_stabilizer(n: usize) -> f64 {
    (n as f64).powf(-0.5)
}

/// A fitted adaptive-LASSO (or LASSO) model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlassoFit {
    pub beta_hat: Vec<f64>,
    /// Indices with exactly nonzero coefficients, ascending.
    pub active_set: Vec<usize>,
    /// Raw residuals `y - X beta_hat`.
    pub residuals: Vec<f64>,
    /// Residuals minus their mean.
    pub centered_residuals: Vec<f64>,
    /// `n^{-1} * sum of squared centered residuals`.
    pub sigma_hat_sq: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Penalty weights used by the solver.
    pub weights: Vec<f64>,
    /// Full coordinate-descent cycles executed.
    pub iterations: usize,
    pub converged: bool,
}

/// Solver knobs beyond (lambda, gamma). The defaults match the documented
/// convergence contract; `warm_start` seeds the coordinates (used heavily by
/// the bootstrap, where the original fit is an excellent start).
#[derive(Debug, Clone)]
pub struct AlassoConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub max_cycles: usize,
    pub tol: f64,
    pub warm_start: Option<Vec<f64>>,
}

impl AlassoConfig {
    pub fn new(lambda: f64, gamma: f64) -> Self {
        AlassoConfig {
            lambda,
            gamma,
            max_cycles: MAX_CYCLES,
            tol: CONVERGENCE_TOL,
            warm_start: None,
        }
    }

    pub fn warm_start(mut self, beta: Vec<f64>) -> Self {
        self.warm_start = Some(beta);
        self
    }
}

/// Ordinary least squares initial estimate.
///
/// Requires p <= n and a numerically nonsingular design. The returned
/// estimate carries the default stabilizer `n^{-1/2}`.
pub fn fit_ols(data: &Dataset) -> Result<InitialEstimate> {
    let beta_tilde = least_squares(data.x(), data.y())?;
    debug_assert!(
        normal_equation_residual(data, &beta_tilde) <= 1e-8,
        "normal equations violated beyond tolerance"
    );
    Ok(InitialEstimate {
        beta_tilde,
        method: InitialEstimator::Ols,
        stabilizer: default_stabilizer(data.n()),
    })
}

/// Relative sup-norm of X'(y - X b) against X'y, for the OLS postcondition.
fn normal_equation_residual(data: &Dataset, beta: &[f64]) -> f64 {
    let fitted = data.x().matvec(beta).expect("shape checked");
    let resid: Vec<f64> = data.y().iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mut grad_max = 0.0f64;
    let mut xty_max = 0.0f64;
    for j in 0..data.p() {
        let col = data.x().col(j);
        grad_max = grad_max.max(dot(&col, &resid).abs());
        xty_max = xty_max.max(dot(&col, data.y()).abs());
    }
    grad_max / xty_max.max(1e-300)
}

/// LASSO initial estimate at penalty `lambda1` (all weights 1).
///
/// Used when p > n, where least squares is unavailable. Deterministic: no
/// randomness enters the solver.
pub fn fit_lasso(data: &Dataset, lambda1: f64) -> Result<InitialEstimate> {
    fit_lasso_warm(data, lambda1, None)
}

/// LASSO fit seeded at `warm` (bootstrap refits start from the observed
/// solution; the minimizer is the same, reached in far fewer cycles).
pub(crate) fn fit_lasso_warm(
    data: &Dataset,
    lambda1: f64,
    warm: Option<&[f64]>,
) -> Result<InitialEstimate> {
    if !(lambda1 > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "lambda1",
            value: lambda1,
            range: "(0, inf)",
        });
    }
    let weights = vec![1.0; data.p()];
    let solution = coordinate_descent(data, &weights, lambda1, warm, CONVERGENCE_TOL, MAX_CYCLES)?;
    Ok(InitialEstimate {
        beta_tilde: solution.beta,
        method: InitialEstimator::Lasso { lambda1 },
        stabilizer: default_stabilizer(data.n()),
    })
}

/// Adaptive-LASSO fit at `(lambda, gamma)` with weights from `init`.
pub fn fit_alasso(
    data: &Dataset,
    init: &InitialEstimate,
    lambda: f64,
    gamma: f64,
) -> Result<AlassoFit> {
    fit_alasso_with(data, init, &AlassoConfig::new(lambda, gamma))
}

/// Adaptive-LASSO fit with explicit solver configuration.
pub fn fit_alasso_with(
    data: &Dataset,
    init: &InitialEstimate,
    config: &AlassoConfig,
) -> Result<AlassoFit> {
    if !(config.lambda > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "lambda",
            value: config.lambda,
            range: "(0, inf)",
        });
    }
    if !(config.gamma > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "gamma",
            value: config.gamma,
            range: "(0, inf)",
        });
    }
    if init.beta_tilde.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: init.beta_tilde.len(),
            context: "initial estimate length",
        });
    }
    let weights = init.weights(config.gamma)?;
    let solution = coordinate_descent(
        data,
        &weights,
        config.lambda,
        config.warm_start.as_deref(),
        config.tol,
        config.max_cycles,
    )?;
    let n = data.n();
    let fitted = data.x().matvec(&solution.beta)?;
    let residuals: Vec<f64> = data.y().iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let centered_residuals: Vec<f64> = residuals.iter().map(|e| e - mean).collect();
    let sigma_hat_sq = centered_residuals.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let active_set = solution
        .beta
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect();
    Ok(AlassoFit {
        beta_hat: solution.beta,
        active_set,
        residuals,
        centered_residuals,
        sigma_hat_sq,
        lambda: config.lambda,
        gamma: config.gamma,
        weights,
        iterations: solution.cycles,
        converged: true,
    })
}

struct CdSolution {
    beta: Vec<f64>,
    cycles: usize,
}

/// Cyclic coordinate descent on the weighted-l1 criterion.
///
/// Maintains the residual vector incrementally, so one full cycle costs
/// O(n p). Errors with `NoConvergence` if the sup-norm coefficient change
/// still exceeds `tol` after `max_cycles` cycles.
fn coordinate_descent(
    data: &Dataset,
    weights: &[f64],
    lambda: f64,
    warm_start: Option<&[f64]>,
    tol: f64,
    max_cycles: usize,
) -> Result<CdSolution> {
    let p = data.p();
    let x = data.x();

    // Column views and squared norms, hoisted out of the sweep.
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.col(j)).collect();
    let col_sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    for (j, &sq) in col_sq.iter().enumerate() {
        if sq == 0.0 {
            return Err(Error::ZeroWeightColumn { column: j });
        }
    }
    let thresholds: Vec<f64> = weights.iter().map(|w| lambda * w / 2.0).collect();

    let mut beta = match warm_start {
        Some(b) if b.len() == p => b.to_vec(),
        Some(b) => {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: b.len(),
                context: "warm start length",
            })
        }
        None => vec![0.0; p],
    };
    let mut residual: Vec<f64> = if beta.iter().all(|b| *b == 0.0) {
        data.y().to_vec()
    } else {
        let fitted = x.matvec(&beta)?;
        data.y().iter().zip(&fitted).map(|(y, f)| y - f).collect()
    };

    #[cfg(debug_assertions)]
    let mut last_objective = objective_value(data, weights, lambda, &beta);

    let mut last_change = f64::INFINITY;
    for cycle in 1..=max_cycles {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let old = beta[j];
            // Partial residual correlation: z = x_j'r + ||x_j||^2 b_j.
            let z = dot(&cols[j], &residual) + col_sq[j] * old;
            let new = soft_threshold(z, thresholds[j]) / col_sq[j];
            if new != old {
                let delta = new - old;
                for (r, &xij) in residual.iter_mut().zip(&cols[j]) {
                    *r -= delta * xij;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }

        #[cfg(debug_assertions)]
        {
            let obj = objective_value(data, weights, lambda, &beta);
            debug_assert!(
                obj <= last_objective + 1e-9 * last_objective.abs().max(1.0),
                "objective increased across a CD cycle: {last_objective} -> {obj}"
            );
            last_objective = obj;
        }

        if max_change < tol {
            return Ok(CdSolution { beta, cycles: cycle });
        }
        last_change = max_change;
    }
    Err(Error::NoConvergence {
        max_cycles,
        last_change,
    })
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Value of the penalized criterion at `beta`.
pub fn objective_value(data: &Dataset, weights: &[f64], lambda: f64, beta: &[f64]) -> f64 {
    let fitted = data.x().matvec(beta).expect("shape checked");
    let rss: f64 = data
        .y()
        .iter()
        .zip(&fitted)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    let penalty: f64 = weights
        .iter()
        .zip(beta)
        .map(|(w, b)| w * b.abs())
        .sum();
    rss + lambda * penalty
}

/// Smallest penalty that shrinks every LASSO coefficient to zero:
/// `2 * max_j |x_j'y|`.
pub fn full_shrinkage_lambda(data: &Dataset) -> f64 {
    (0..data.p())
        .map(|j| 2.0 * dot(&data.x().col(j), data.y()).abs())
        .fold(0.0, f64::max)
}

/// Per-coordinate KKT stationarity check for a fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KktCoordinate {
    pub index: usize,
    pub active: bool,
    /// Excess over the applicable KKT bound (0 when satisfied exactly).
    pub violation: f64,
    pub pass: bool,
}

/// KKT certificate: stationarity of every coordinate at tolerance `tol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KktReport {
    pub tol: f64,
    pub coordinates: Vec<KktCoordinate>,
    pub pass: bool,
}

/// Certifies first-order optimality of `fit` on `data`.
///
/// Active coordinates must satisfy `|2 x_j'e - lambda w_j sgn(b_j)| <= tol`;
/// inactive ones `|2 x_j'e| <= lambda w_j + tol`, where `e` are the fit's
/// residuals.
pub fn kkt_certificate(fit: &AlassoFit, data: &Dataset, tol: f64) -> Result<KktReport> {
    if fit.beta_hat.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            got: fit.beta_hat.len(),
            context: "fit width",
        });
    }
    let mut coordinates = Vec::with_capacity(data.p());
    let mut pass = true;
    for j in 0..data.p() {
        let grad = 2.0 * dot(&data.x().col(j), &fit.residuals);
        let b = fit.beta_hat[j];
        let violation = if b != 0.0 {
            (grad - fit.lambda * fit.weights[j] * b.signum()).abs()
        } else {
            (grad.abs() - fit.lambda * fit.weights[j]).max(0.0)
        };
        let ok = violation <= tol;
        pass &= ok;
        coordinates.push(KktCoordinate {
            index: j,
            active: b != 0.0,
            violation,
            pass: ok,
        });
    }
    Ok(KktReport {
        tol,
        coordinates,
        pass,
    })
}

/// What the cross-validation refits on each training fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvObjective {
    /// Plain LASSO at each grid penalty.
    Lasso,
    /// Adaptive LASSO with weights fixed from a full-data initial estimate.
    AlassoGivenInit,
}

/// Cross-validation outcome: the chosen penalty and the full CV curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub chosen_lambda: f64,
    pub grid: Vec<f64>,
    /// Mean held-out squared error per grid point.
    pub mean_errors: Vec<f64>,
    /// Fold index of each observation (the seeded assignment, recorded for
    /// reproducibility).
    pub fold_assignment: Vec<usize>,
    pub folds: usize,
}

/// K-fold cross-validation over a penalty grid.
///
/// Observations are dealt into folds through a seeded permutation, as evenly
/// as possible. The chosen penalty minimizes the mean held-out squared error;
/// exact ties break toward the larger penalty. `init` is required for the
/// `AlassoGivenInit` objective (its gamma is supplied separately) and ignored
/// for `Lasso`.
pub fn select_lambda_cv(
    data: &Dataset,
    init: Option<&InitialEstimate>,
    gamma: f64,
    grid: &[f64],
    folds: usize,
    objective: CvObjective,
    rng: &mut RngStream,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::EmptySample);
    }
    if folds < 2 {
        return Err(Error::ParameterOutOfRange {
            name: "folds",
            value: folds as f64,
            range: "[2, n/2]",
        });
    }
    let n = data.n();
    if n / folds < 2 {
        return Err(Error::FoldTooSmall { size: n / folds });
    }
    let weights = match objective {
        CvObjective::Lasso => vec![1.0; data.p()],
        CvObjective::AlassoGivenInit => init
            .ok_or(Error::MissingInitialEstimate)
            .and_then(|i| i.weights(gamma))?,
    };

    // Seeded permutation, dealt round-robin so fold sizes differ by <= 1.
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut fold_assignment = vec![0usize; n];
    for (pos, &obs) in perm.iter().enumerate() {
        fold_assignment[obs] = pos % folds;
    }

    let mut mean_errors = vec![0.0f64; grid.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| fold_assignment[*i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|i| fold_assignment[*i] == fold).collect();
        let train_data = subset(data, &train)?;
        let mut warm: Option<Vec<f64>> = None;
        // Descend the grid from the largest penalty so warm starts carry over.
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&a, &b| grid[b].partial_cmp(&grid[a]).unwrap());
        for &gi in &order {
            let sol = coordinate_descent(
                &train_data,
                &weights,
                grid[gi],
                warm.as_deref(),
                CONVERGENCE_TOL,
                MAX_CYCLES,
            )?;
            let mut sse = 0.0;
            for &i in &test {
                let pred = dot(data.x().row(i), &sol.beta);
                sse += (data.y()[i] - pred) * (data.y()[i] - pred);
            }
            mean_errors[gi] += sse;
            warm = Some(sol.beta);
        }
    }
    for e in &mut mean_errors {
        *e /= n as f64;
    }

    let mut best = 0usize;
    for i in 1..grid.len() {
        let better = mean_errors[i] < mean_errors[best]
            || (mean_errors[i] == mean_errors[best] && grid[i] > grid[best]);
        if better {
            best = i;
        }
    }
    Ok(CvReport {
        chosen_lambda: grid[best],
        grid: grid.to_vec(),
        mean_errors,
        fold_assignment,
        folds,
    })
}

/// Row subset of a dataset (order preserved).
fn subset(data: &Dataset, rows: &[usize]) -> Result<Dataset> {
    let p = data.p();
    let mut xd = Vec::with_capacity(rows.len() * p);
    let mut y = Vec::with_capacity(rows.len());
    for &i in rows {
        xd.extend_from_slice(data.x().row(i));
        y.push(data.y()[i]);
    }
    Dataset::new(crate::numerics::Matrix::new(rows.len(), p, xd)?, y)
}
