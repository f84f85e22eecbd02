//! Numerical substrate: dense matrices, symmetric eigendecomposition,
//! normal-distribution functions, empirical quantiles, and seeded RNG streams.

pub mod eigen;
pub mod matrix;
pub mod normal;
pub mod quantile;
pub mod rng;

pub use eigen::{max_eigenvalue, min_eigenvalue, sym_eigen, SymEigen};
pub use matrix::{cholesky, dot, least_squares, solve_spd, solve_spd_vec, Matrix};
pub use quantile::{empirical_quantile, quantile_sorted};
pub use rng::RngStream;
