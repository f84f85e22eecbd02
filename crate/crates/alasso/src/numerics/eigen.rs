//! Symmetric eigendecomposition via the cyclic Jacobi method.
//!
//! The matrices this crate decomposes (Gram blocks, canonical-correlation
//! kernels) are small and symmetric, where Jacobi is simple, accurate, and
//! produces orthonormal eigenvectors to working precision.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;

/// Eigenvalues (ascending) and matching orthonormal eigenvectors.
///
/// Column `j` of `vectors` is the eigenvector for `values[j]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Symmetry is checked at relative tolerance 1e-10. Sweeps rotate away
/// off-diagonal mass until it falls below 1e-14 times the matrix scale,
/// capped at 100 sweeps (always plenty for the sizes we hit; the cap only
/// guards against pathological input).
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen> {
    a.symmetry_check(1e-10)?;
    let n = a.rows();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs().max(1e-300);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m.get(i, j).abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                // Classical Jacobi rotation annihilating m[p][q].
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    // Sort ascending, permuting eigenvector columns alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).partial_cmp(&m.get(j, j)).unwrap());
    let values: Vec<f64> = order.iter().map(|&j| m.get(j, j)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, new_j, v.get(i, old_j));
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(sym_eigen(a)?.values[0])
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(a: &Matrix) -> Result<f64> {
    let e = sym_eigen(a)?;
    Ok(*e.values.last().unwrap())
}
