use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

/// Estimator output: a precision matrix, the covariance it inverts (when one
/// exists), and the tuning values that produced it.
///
/// Nodewise estimators never define a covariance, so `cov` is `None` for them.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub method: String,
    pub cov: Option<DMatrix<f64>>,
    pub precision: DMatrix<f64>,
    pub tuning: BTreeMap<String, f64>,
}

/// Alias used where only the precision side matters.
pub type PrecisionEstimate = CovarianceEstimate;

impl CovarianceEstimate {
    pub fn new(
        method: impl Into<String>,
        cov: Option<DMatrix<f64>>,
        precision: DMatrix<f64>,
    ) -> Self {
        Self {
            method: method.into(),
            cov,
            precision,
            tuning: BTreeMap::new(),
        }
    }

    pub fn with_tuning(mut self, key: impl Into<String>, value: f64) -> Self {
        self.tuning.insert(key.into(), value);
        self
    }

    pub fn dim(&self) -> usize {
        self.precision.nrows()
    }
}

impl fmt::Display for CovarianceEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (p={})", self.method, self.dim())?;
        for (k, v) in &self.tuning {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}
