//! Regression datasets: design matrix, response, and column standardization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Centering/scaling applied to one design column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub center: f64,
    pub scale: f64,
}

/// Column standardization choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardize {
    /// Center each column and scale it to unit Euclidean norm.
    UnitNorm,
    /// Center each column and scale it to unit sample standard deviation
    /// (n-1 denominator).
    UnitSd,
    /// Leave the design as supplied.
    None,
}

impl std::str::FromStr for Standardize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unitnorm" => Ok(Standardize::UnitNorm),
            "unitsd" => Ok(Standardize::UnitSd),
            "none" => Ok(Standardize::None),
            other => Err(Error::UnknownVariant(format!(
                "standardization `{other}` (expected unitnorm, unitsd, or none)"
            ))),
        }
    }
}

/// A fixed-design regression sample.
///
/// Standardized datasets remember the applied column transforms and the
/// response centering/scaling, so fitted coefficients can be mapped back to
/// the original scale.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Shared so that swapping the response (the bootstrap does this per
    /// replicate) never copies the design.
    x: Arc<Matrix>,
    y: Vec<f64>,
    column_scale: Option<Vec<ColumnScale>>,
    response_center: Option<f64>,
    response_scale: Option<f64>,
}

impl Dataset {
    /// Builds a dataset, validating shape and finiteness. Requires n >= 2.
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
                context: "response length",
            });
        }
        if x.rows() < 2 {
            return Err(Error::EmptySample);
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: i,
                    col: 0,
                    value: v,
                });
            }
        }
        Ok(Dataset {
            x: Arc::new(x),
            y,
            column_scale: None,
            response_center: None,
            response_scale: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Column transforms applied by `standardized`, if any.
    pub fn column_scale(&self) -> Option<&[ColumnScale]> {
        self.column_scale.as_deref()
    }

    pub fn response_center(&self) -> Option<f64> {
        self.response_center
    }

    pub fn response_scale(&self) -> Option<f64> {
        self.response_scale
    }

    /// Replaces the response, keeping the design and transforms (used by the
    /// bootstrap, which regenerates y on the same X).
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: y.len(),
                context: "replacement response length",
            });
        }
        Ok(Dataset {
            x: self.x.clone(),
            y,
            column_scale: self.column_scale.clone(),
            response_center: self.response_center,
            response_scale: self.response_scale,
        })
    }

    /// Standardizes columns per `kind`; unless `kind` is `None`, the response
    /// is centered as well (the intercept is absorbed).
    ///
    /// Constant columns cannot be scaled and yield `ZeroWeightColumn`.
    pub fn standardized(&self, kind: Standardize) -> Result<Dataset> {
        if matches!(kind, Standardize::None) {
            return Ok(self.clone());
        }
        let n = self.n();
        let p = self.p();
        let mut scales = Vec::with_capacity(p);
        let mut xs = Matrix::zeros(n, p);
        for j in 0..p {
            let col = self.x.col(j);
            let center = col.iter().sum::<f64>() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - center).powi(2)).sum();
            let scale = match kind {
                Standardize::UnitNorm => ss.sqrt(),
                Standardize::UnitSd => (ss / (n as f64 - 1.0)).sqrt(),
                Standardize::None => unreachable!(),
            };
            if scale == 0.0 {
                return Err(Error::ZeroWeightColumn { column: j });
            }
            for i in 0..n {
                xs.set(i, j, (col[i] - center) / scale);
            }
            scales.push(ColumnScale { center, scale });
        }
        let y_center = self.y.iter().sum::<f64>() / n as f64;
        let y: Vec<f64> = self.y.iter().map(|v| v - y_center).collect();
        Ok(Dataset {
            x: Arc::new(xs),
            y,
            column_scale: Some(scales),
            response_center: Some(y_center),
            response_scale: self.response_scale,
        })
    }

    /// Additionally divides the (already centered) response by its sample
    /// standard deviation, recording the factor.
    pub fn scaled_response(&self) -> Result<Dataset> {
        let n = self.n() as f64;
        let mean = self.y.iter().sum::<f64>() / n;
        let sd = (self.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if sd == 0.0 {
            return Err(Error::DegenerateVariance { value: 0.0 });
        }
        let mut out = self.clone();
        out.y = self.y.iter().map(|v| v / sd).collect();
        out.response_scale = Some(sd * self.response_scale.unwrap_or(1.0));
        Ok(out)
    }

    /// Maps coefficients fitted on this (possibly standardized) dataset back
    /// to the original scale: returns `(coefficients, intercept)`.
    pub fn original_scale_coefficients(&self, beta: &[f64]) -> Result<(Vec<f64>, f64)> {
        if beta.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: beta.len(),
                context: "coefficient length",
            });
        }
        let r = self.response_scale.unwrap_or(1.0);
        let coefs: Vec<f64> = match &self.column_scale {
            Some(scales) => beta
                .iter()
                .zip(scales)
                .map(|(b, s)| r * b / s.scale)
                .collect(),
            None => beta.iter().map(|b| r * b).collect(),
        };
        let mut intercept = self.response_center.unwrap_or(0.0);
        if let Some(scales) = &self.column_scale {
            for (c, s) in coefs.iter().zip(scales) {
                intercept -= c * s.center;
            }
        }
        Ok((coefs, intercept))
    }
}
