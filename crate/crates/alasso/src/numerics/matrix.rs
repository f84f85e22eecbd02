//! Dense row-major matrix with the handful of factorizations the estimators
//! need: Cholesky solves for symmetric positive-definite systems and
//! Householder QR for least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense matrix with `f64` entries stored row-major.
///
/// Values are immutable after construction in practice: all operations
/// return new matrices, so shared references are safe across threads.
/// Deserialization trusts its own serialized form (shape consistency is not
/// re-validated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
                context: "row-major storage length",
            });
        }
        for (k, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: k / cols.max(1),
                    col: k % cols.max(1),
                    value: v,
                });
            }
        }
        Ok(Matrix { rows, cols, data })
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    got: row.len(),
                    context: "ragged row in from_rows",
                });
            }
            data.extend_from_slice(row);
        }
        Matrix::new(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry accessor; panics on out-of-range indices like slice indexing.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Borrow of row `i` as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copy of column `j`.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Raw row-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry (0 for empty matrices).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Transpose.
    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
                context: "matmul inner dimension",
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dest = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dest.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: v.len(),
                context: "matvec length",
            });
        }
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect())
    }

    /// Maximum absolute asymmetry `max |A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Checks symmetry relative to the matrix scale.
    pub fn symmetry_check(&self, rel_tol: f64) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::NonSymmetric {
                max_asymmetry: f64::INFINITY,
            });
        }
        let asym = self.max_asymmetry();
        if asym > rel_tol * self.max_abs().max(1e-300) {
            return Err(Error::NonSymmetric { max_asymmetry: asym });
        }
        Ok(())
    }
}

/// Dot product of equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `L L' = A`.
///
/// Fails with `NotPositiveDefinite` when a pivot is non-positive. Symmetry is
/// checked at relative tolerance 1e-10 first.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    a.symmetry_check(1e-10)?;
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves `A X = B` for symmetric positive-definite `A` via Cholesky.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.rows(),
            context: "solve_spd right-hand side rows",
        });
    }
    let l = cholesky(a)?;
    let n = a.rows();
    let m = b.cols();
    let mut x = b.clone();
    // Forward substitution: L z = B.
    for col in 0..m {
        for i in 0..n {
            let mut s = x.get(i, col);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, col);
            }
            x.set(i, col, s / l.get(i, i));
        }
    }
    // Back substitution: L' X = z.
    for col in 0..m {
        for i in (0..n).rev() {
            let mut s = x.get(i, col);
            for k in (i + 1)..n {
                s -= l.get(k, i) * x.get(k, col);
            }
            x.set(i, col, s / l.get(i, i));
        }
    }
    Ok(x)
}

/// Solves `A x = b` for symmetric positive-definite `A` with a vector
/// right-hand side.
pub fn solve_spd_vec(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = Matrix::new(b.len(), 1, b.to_vec())?;
    Ok(solve_spd(a, &rhs)?.as_slice().to_vec())
}

/// Least-squares solution of `min ||y - X b||` via Householder QR.
///
/// Requires `n >= p`. Rank deficiency is reported as `SingularDesign` with the
/// offending column: an R pivot below 1e-10 times the largest pivot.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
            context: "least_squares response length",
        });
    }
    if p > n {
        return Err(Error::DimensionExceedsSample { p, n });
    }
    let mut r = x.clone();
    let mut q_t_y = y.to_vec();
    // Householder triangularization, applying each reflector to y as well.
    for j in 0..p {
        let mut norm_sq = 0.0;
        for i in j..n {
            let v = r.get(i, j);
            norm_sq += v * v;
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            continue; // zero pivot caught below
        }
        let alpha = if r.get(j, j) > 0.0 { -norm } else { norm };
        // Reflector v = x - alpha e1 on rows j..n, normalized so v[0] = 1.
        let v0 = r.get(j, j) - alpha;
        if v0 == 0.0 {
            r.set(j, j, alpha);
            continue;
        }
        let mut v = vec![1.0; n - j];
        for i in (j + 1)..n {
            v[i - j] = r.get(i, j) / v0;
        }
        let beta = -v0 / alpha; // 2 / v'v for this normalization
        for col in j..p {
            let mut s = 0.0;
            for i in j..n {
                s += v[i - j] * r.get(i, col);
            }
            s *= beta;
            for i in j..n {
                r.set(i, col, r.get(i, col) - s * v[i - j]);
            }
        }
        let mut s = 0.0;
        for i in j..n {
            s += v[i - j] * q_t_y[i];
        }
        s *= beta;
        for i in j..n {
            q_t_y[i] -= s * v[i - j];
        }
        r.set(j, j, alpha);
    }
    // Back substitution on the p x p upper triangle.
    let max_pivot = (0..p).fold(0.0f64, |m, j| m.max(r.get(j, j).abs()));
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let pivot = r.get(j, j);
        if pivot.abs() <= 1e-10 * max_pivot.max(1e-300) {
            return Err(Error::SingularDesign { column: j });
        }
        let mut s = q_t_y[j];
        for k in (j + 1)..p {
            s -= r.get(j, k) * beta[k];
        }
        beta[j] = s / pivot;
    }
    Ok(beta)
}
