use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::TrainMatrix;

pub const DEFAULT_RIDGE_EPSILON: f64 = 1e-8;

/// Ordinary least squares on the raw feature slots (categorical slots
/// enter as their codes), with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub ridge_epsilon: f64,
}

impl LinearModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Minimizes `Σ (y - b0 - b·x)² + ε‖b‖²` through the centred normal
/// equations `(XᵀX + εI) b = Xᵀy`.
pub fn ols_fit(m: &TrainMatrix, ridge_epsilon: f64) -> Result<LinearModel> {
    let n = m.n_rows();
    if n == 0 {
        return Err(Error::Empty("cannot fit a linear model on an empty training set"));
    }
    if !(ridge_epsilon.is_finite() && ridge_epsilon >= 0.0) {
        return Err(Error::Config(format!(
            "ridge_epsilon must be >= 0, got {ridge_epsilon}"
        )));
    }
    let p = m.n_slots();
    let x_mean: Vec<f64> = (0..p).map(|j| m.column(j).iter().sum::<f64>() / n as f64).collect();
    let y_mean = m.targets().iter().sum::<f64>() / n as f64;

    let x = DMatrix::from_fn(n, p, |i, j| m.column(j)[i] - x_mean[j]);
    let y = DVector::from_iterator(n, m.targets().iter().map(|t| t - y_mean));
    let mut gram = x.tr_mul(&x);
    for j in 0..p {
        gram[(j, j)] += ridge_epsilon;
    }
    let rhs = x.tr_mul(&y);

    let beta = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        // singular even with the ridge term (e.g. ε = 0 and a constant slot)
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Config(format!("normal equations: {e}")))?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Config("normal equations gave non-finite coefficients".into()));
    }
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, xm)| b * xm).sum::<f64>();
    Ok(LinearModel {
        intercept,
        coefficients: beta.iter().copied().collect(),
        ridge_epsilon,
    })
}
