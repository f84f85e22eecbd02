//! Edgeworth-expansion densities for the raw and studentized pivots at
//! q = 1, used as diagnostics: when the expansion's correction terms are
//! small the oracle normal is adequate, and when the expansion tracks the
//! Monte Carlo distribution of the studentized pivot more closely than the
//! plain normal does, the bootstrap's higher-order refinement is worth its
//! cost.
//!
//! Both densities are a Gaussian times a polynomial bracket built from
//! Hermite-type factors `chi_k(x; v)`, defined by `chi_k(x;v) phi(x;v) =
//! (-d/dx)^k phi(x;v)`. The ingredients (first-order bias `f_n`, variances,
//! averaged design powers, error moments) can be evaluated at the generating
//! truth in a simulation, or plugged in from a fit; plug-in output is
//! labeled as such.
//!
//! The raw-pivot bracket `1 + sum f^k chi_k` is kept exactly as displayed in
//! the source analysis; note its first-order term tilts the mean to `+f_n`,
//! while the pivot itself (and the studentized density's `(-f)^k / k!`
//! series) centers at `-f_n`. Interval probabilities from the raw-pivot
//! density therefore carry an O(|f|) centering error and the studentized
//! density is the one to trust for calibration comparisons.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimators::AlassoFit;
use crate::numerics::{cholesky, dot, solve_spd_vec, Matrix};
use crate::pivots::{PivotSpec, DEGENERATE_VARIANCE_TOL};

/// Largest polynomial order the bias series may reach.
pub const MAX_R1: usize = 6;
/// Absolute tolerance of the adaptive quadrature.
pub const QUADRATURE_TOL: f64 = 1e-8;
const MAX_QUADRATURE_DEPTH: usize = 48;

/// Error-distribution moments entering the expansions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorMoments {
    pub sigma_sq: f64,
    pub mu3: f64,
}

impl ErrorMoments {
    pub fn new(sigma_sq: f64, mu3: f64) -> Result<Self> {
        if !(sigma_sq > DEGENERATE_VARIANCE_TOL) {
            return Err(Error::DegenerateVariance { value: sigma_sq });
        }
        Ok(ErrorMoments { sigma_sq, mu3 })
    }

    /// Plug-in moments from centered residuals: `n^{-1} sum e_i^2` and
    /// `n^{-1} sum e_i^3`.
    pub fn from_residuals(centered: &[f64]) -> Result<Self> {
        if centered.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = centered.len() as f64;
        let sigma_sq = centered.iter().map(|e| e * e).sum::<f64>() / n;
        let mu3 = centered.iter().map(|e| e * e * e).sum::<f64>() / n;
        ErrorMoments::new(sigma_sq, mu3)
    }
}

/// Whether an expansion was built from generating-truth quantities or from
/// fitted stand-ins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeworthMode {
    Population,
    PlugIn,
}

/// Everything the density formulas need, precomputed once per design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeworthSpec {
    pub n: usize,
    /// Pivot width; only 1 is supported.
    pub q: usize,
    /// First-order bias of the raw pivot along the contrast.
    pub f_n: f64,
    /// Contrast variance of the design score, `n^{-1} sum (xi0_i)^2`.
    pub upsilon: f64,
    /// Same with the penalty perturbation folded in,
    /// `n^{-1} sum (xi0_i + eta0_i)^2`.
    pub upsilon_breve: f64,
    pub sigma_sq: f64,
    pub mu3: f64,
    /// Truncation order of the bias series: smallest `r >= 1` with
    /// `|f_n|^{r+1} <= n^{-1/2}`, capped at `MAX_R1`.
    pub r1: usize,
    /// Averaged powers of the design score: `xi0_moments[k-1]` holds
    /// `n^{-1} sum (xi0_i)^k` for k = 1, 2, 3.
    pub xi0_moments: [f64; 3],
    pub mode: EdgeworthMode,
}

/// Smallest series order `r >= 1` with `|f|^{r+1} <= n^{-1/2}`, capped.
pub fn select_r1(f_n: f64, n: usize) -> usize {
    let cutoff = (n as f64).powf(-0.5);
    let f = f_n.abs();
    (1..=MAX_R1)
        .find(|r| f.powi(*r as i32 + 1) <= cutoff)
        .unwrap_or(MAX_R1)
}

/// Builds the expansion ingredients from generating-truth coefficients.
///
/// `lambda` is in the same units as the bias-correction penalty: the
/// first-order shrinkage of the coordinate-descent criterion corresponds to
/// half its penalty, so callers working from a fit pass `fit.lambda / 2`.
/// The design-side quantities need the full Gram inverse, hence p <= n.
pub fn build_spec(
    data: &Dataset,
    beta_true: &[f64],
    lambda: f64,
    gamma: f64,
    spec: &PivotSpec,
    moments: &ErrorMoments,
) -> Result<EdgeworthSpec> {
    build_spec_mode(
        data,
        beta_true,
        lambda,
        gamma,
        spec,
        moments,
        EdgeworthMode::Population,
    )
}

/// Plug-in expansion: support and coefficients from the fit's active set,
/// error moments from its centered residuals. `lambda` as in [`build_spec`]
/// (pass `fit.lambda / 2` to match the criterion's actual shrinkage).
pub fn plugin_spec(
    data: &Dataset,
    fit: &AlassoFit,
    lambda: f64,
    spec: &PivotSpec,
) -> Result<EdgeworthSpec> {
    if fit.active_set.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let moments = ErrorMoments::from_residuals(&fit.centered_residuals)?;
    build_spec_mode(
        data,
        &fit.beta_hat,
        lambda,
        fit.gamma,
        spec,
        &moments,
        EdgeworthMode::PlugIn,
    )
}

fn build_spec_mode(
    data: &Dataset,
    beta_true: &[f64],
    lambda: f64,
    gamma: f64,
    spec: &PivotSpec,
    moments: &ErrorMoments,
    mode: EdgeworthMode,
) -> Result<EdgeworthSpec> {
    let n = data.n();
    let p = data.p();
    if spec.q() != 1 {
        return Err(Error::ParameterOutOfRange {
            name: "q",
            value: spec.q() as f64,
            range: "{1} (expansions are scalar-only)",
        });
    }
    if spec.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: spec.p(),
            context: "pivot contrast width",
        });
    }
    if beta_true.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: beta_true.len(),
            context: "coefficient length",
        });
    }
    if p > n {
        return Err(Error::RequiresPleN { p, n });
    }
    if !(lambda >= 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "lambda",
            value: lambda,
            range: "[0, inf)",
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "gamma",
            value: gamma,
            range: "(0, inf)",
        });
    }
    let support: Vec<usize> = (0..p).filter(|&j| beta_true[j] != 0.0).collect();
    if support.is_empty() {
        return Err(Error::EmptyActiveSet);
    }

    let x = data.x();
    let nf = n as f64;
    let root_n = nf.sqrt();

    // Support block of the scaled Gram matrix and the contrast row through
    // its inverse: u = C11^{-1} (D restricted)'.
    let k = support.len();
    let mut c11 = Matrix::zeros(k, k);
    let cols: Vec<Vec<f64>> = support.iter().map(|&j| x.col(j)).collect();
    for a in 0..k {
        for b in a..k {
            let v = dot(&cols[a], &cols[b]) / nf;
            c11.set(a, b, v);
            c11.set(b, a, v);
        }
    }
    let dr = spec.restrict(&support);
    let u = solve_spd_vec(&c11, dr.row(0)).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularSubmatrix,
        other => other,
    })?;

    // First-order bias along the contrast.
    let s1: Vec<f64> = support
        .iter()
        .map(|&j| beta_true[j].signum() * beta_true[j].abs().powf(-gamma))
        .collect();
    let f_n = dot(&u, &s1) * lambda / root_n;

    // Design scores xi0_i = u . x_i restricted to the support, and the
    // penalty perturbation eta0_i built from rows of the full Gram inverse.
    let xi0: Vec<f64> = (0..n)
        .map(|i| {
            support
                .iter()
                .enumerate()
                .map(|(m, &j)| u[m] * x.get(i, j))
                .sum()
        })
        .collect();

    // eta0_i = sum_m u_m * g_m * xtilde_{i, j_m}, where xtilde_i = C_n^{-1}
    // x_i and g carries the weight-gradient scale.
    let mut c_full = Matrix::zeros(p, p);
    for a in 0..p {
        let col_a = x.col(a);
        for b in a..p {
            let v = dot(&col_a, &x.col(b)) / nf;
            c_full.set(a, b, v);
            c_full.set(b, a, v);
        }
    }
    // One SPD solve per support coordinate yields the needed rows of
    // C_n^{-1}.
    let l_full = cholesky(&c_full).map_err(|e| match e {
        Error::NotPositiveDefinite { index, .. } => Error::SingularDesign { column: index },
        other => other,
    })?;
    let g: Vec<f64> = support
        .iter()
        .map(|&j| {
            -(lambda / root_n) * beta_true[j].signum() * gamma
                * beta_true[j].abs().powf(-(gamma + 1.0))
        })
        .collect();
    let mut eta0 = vec![0.0; n];
    for (m, &j) in support.iter().enumerate() {
        let mut unit = vec![0.0; p];
        unit[j] = 1.0;
        let inv_col = solve_with_factor(&l_full, &unit);
        let coeff = u[m] * g[m];
        for (i, e) in eta0.iter_mut().enumerate() {
            let xtilde_ij: f64 = (0..p).map(|c| inv_col[c] * x.get(i, c)).sum();
            *e += coeff * xtilde_ij;
        }
    }

    let upsilon = xi0.iter().map(|v| v * v).sum::<f64>() / nf;
    let upsilon_breve = xi0
        .iter()
        .zip(&eta0)
        .map(|(a, b)| (a + b) * (a + b))
        .sum::<f64>()
        / nf;
    if upsilon <= DEGENERATE_VARIANCE_TOL || upsilon_breve <= DEGENERATE_VARIANCE_TOL {
        return Err(Error::DegenerateVariance {
            value: upsilon.min(upsilon_breve),
        });
    }
    let mut xi0_moments = [0.0; 3];
    for (k, slot) in xi0_moments.iter_mut().enumerate() {
        *slot = xi0.iter().map(|v| v.powi(k as i32 + 1)).sum::<f64>() / nf;
    }

    Ok(EdgeworthSpec {
        n,
        q: 1,
        f_n,
        upsilon,
        upsilon_breve,
        sigma_sq: moments.sigma_sq,
        mu3: moments.mu3,
        r1: select_r1(f_n, n),
        xi0_moments,
        mode,
    })
}

/// Forward/back substitution with a precomputed Cholesky factor.
fn solve_with_factor(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * z[k];
        }
        z[i] = s / l.get(i, i);
    }
    z
}

/// Hermite-type factor of one order at one variance: `eval(x)` returns
/// `chi_k(x; v)` with `chi_k(x;v) phi(x;v) = (-d/dx)^k phi(x;v)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HermiteFactor {
    pub order: usize,
    pub variance: f64,
}

impl HermiteFactor {
    pub fn new(order: usize, variance: f64) -> Result<Self> {
        if order > MAX_R1 {
            return Err(Error::ParameterOutOfRange {
                name: "order",
                value: order as f64,
                range: "[0, 6]",
            });
        }
        if !(variance > 0.0) {
            return Err(Error::DegenerateVariance { value: variance });
        }
        Ok(HermiteFactor { order, variance })
    }

    pub fn eval(&self, x: f64) -> f64 {
        chi(self.order, x, self.variance)
    }
}

/// `chi_k(x; v) = He_k(x / sqrt(v)) / v^{k/2}` for k = 0..6; in particular
/// `chi_1 = x/v`, `chi_2 = x^2/v^2 - 1/v`, `chi_3 = x^3/v^3 - 3x/v^2`.
pub fn chi(k: usize, x: f64, v: f64) -> f64 {
    debug_assert!(k <= MAX_R1, "chi order above the series cap");
    debug_assert!(v > 0.0, "chi needs a positive variance");
    let t = x / v.sqrt();
    hermite_he(k, t) / v.powf(k as f64 / 2.0)
}

/// Probabilists' Hermite polynomial `He_k(t)`, k = 0..6.
fn hermite_he(k: usize, t: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => t,
        2 => t * t - 1.0,
        3 => t * (t * t - 3.0),
        4 => t.powi(4) - 6.0 * t * t + 3.0,
        5 => t * (t.powi(4) - 10.0 * t * t + 15.0),
        _ => t.powi(6) - 15.0 * t.powi(4) + 45.0 * t * t - 15.0,
    }
}

fn gaussian_density(x: f64, v: f64) -> f64 {
    (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

/// Expansion density of the raw pivot:
/// `phi(x; s^2 Ub) [1 + sum_{k=1}^{r1} f^k chi_k + (mu3 / 6 sqrt(n))
/// xi0bar(3) chi_3]`, all factors at variance `sigma_sq * upsilon_breve`.
pub fn psi_density(x: f64, spec: &EdgeworthSpec) -> f64 {
    let v = spec.sigma_sq * spec.upsilon_breve;
    let mut bracket = 1.0;
    let mut f_pow = 1.0;
    for k in 1..=spec.r1 {
        f_pow *= spec.f_n;
        bracket += f_pow * chi(k, x, v);
    }
    bracket += spec.mu3 / (6.0 * (spec.n as f64).sqrt()) * spec.xi0_moments[2] * chi(3, x, v);
    gaussian_density(x, v) * bracket
}

/// Expansion density of the studentized pivot:
/// `phi(x; Ub) [1 + sum_{k=1}^{r1} ((-f)^k / k!) chi_k + n^{-1/2}
/// (mu3 / 6 s^3) {[xi0bar(3) - 3 xi0bar(1) xi0bar(2)] chi_3 - 3 xi0bar(1)
/// chi_1}]` at variance `upsilon_breve`.
pub fn pi_density(x: f64, spec: &EdgeworthSpec) -> f64 {
    let v = spec.upsilon_breve;
    let mut bracket = 1.0;
    let mut term = 1.0;
    for k in 1..=spec.r1 {
        term *= -spec.f_n / k as f64;
        bracket += term * chi(k, x, v);
    }
    let [m1, m2, m3] = spec.xi0_moments;
    let skew_scale = spec.mu3 / (6.0 * spec.sigma_sq.powf(1.5) * (spec.n as f64).sqrt());
    bracket += skew_scale * ((m3 - 3.0 * m1 * m2) * chi(3, x, v) - 3.0 * m1 * chi(1, x, v));
    gaussian_density(x, v) * bracket
}

/// Which expansion density an integral refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EeKind {
    /// Raw-pivot density.
    Psi,
    /// Studentized-pivot density.
    Pi,
}

/// Probability the chosen expansion assigns to `[lower, upper]` (adaptive
/// Simpson quadrature, absolute tolerance 1e-8). Infinite endpoints are
/// clamped to a +-(12 sd + |f|) window, outside which the integrand is
/// numerically zero.
pub fn ee_cdf(kind: EeKind, spec: &EdgeworthSpec, lower: f64, upper: f64) -> Result<f64> {
    if lower.is_nan() || upper.is_nan() {
        return Err(Error::ParameterOutOfRange {
            name: "integration endpoint",
            value: f64::NAN,
            range: "any non-NaN value",
        });
    }
    let sd = match kind {
        EeKind::Psi => (spec.sigma_sq * spec.upsilon_breve).sqrt(),
        EeKind::Pi => spec.upsilon_breve.sqrt(),
    };
    let window = 12.0 * sd + spec.f_n.abs();
    let a = lower.max(-window);
    let b = upper.min(window);
    if a >= b {
        return Ok(0.0);
    }
    let f = |x: f64| match kind {
        EeKind::Psi => psi_density(x, spec),
        EeKind::Pi => pi_density(x, spec),
    };
    adaptive_simpson(&f, a, b, QUADRATURE_TOL)
}

/// Classic adaptive Simpson with Richardson acceptance.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        if !(flm.is_finite() && frm.is_finite()) {
            return Err(Error::QuadratureFailure {
                tol,
                achieved: f64::INFINITY,
            });
        }
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::QuadratureFailure {
                tol,
                achieved: delta.abs() / 15.0,
            });
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }

    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::QuadratureFailure {
            tol,
            achieved: f64::INFINITY,
        });
    }
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, MAX_QUADRATURE_DEPTH)
}
