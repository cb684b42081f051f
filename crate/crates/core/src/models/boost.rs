use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{cart_fit, CartConfig, CartTree, TrainMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Echoed into reports. Stages use every row, so fitting draws no
    /// random numbers.
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_stages: 300,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub config: BoostConfig,
    /// Training mean, the stage-0 prediction.
    pub base: f64,
    pub stages: Vec<CartTree>,
}

impl GradientBoosting {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.predict_stages(row, self.stages.len())
    }

    /// Prediction after the first `k` stages.
    pub fn predict_stages(&self, row: &[f64], k: usize) -> f64 {
        let correction: f64 = self.stages[..k].iter().map(|t| t.predict(row)).sum();
        self.base + self.config.learning_rate * correction
    }
}

/// Squared-loss boosting: each stage fits a shallow tree to the current
/// residuals and is added with constant weight `learning_rate`.
pub fn gbm_fit(m: &TrainMatrix, config: &BoostConfig) -> Result<GradientBoosting> {
    let n = m.n_rows();
    if n == 0 {
        return Err(Error::Empty("cannot fit boosting on an empty training set"));
    }
    if !(config.learning_rate > 0.0 && config.learning_rate <= 1.0) {
        return Err(Error::Config(format!(
            "learning_rate must lie in (0, 1], got {}",
            config.learning_rate
        )));
    }
    let base = m.targets().iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let mut work = m.clone();
    let cart = CartConfig {
        max_depth: Some(config.max_depth),
        min_leaf: config.min_leaf,
    };
    let mut stages = Vec::with_capacity(config.n_stages);
    for _ in 0..config.n_stages {
        let residuals: Vec<f64> = m.targets().iter().zip(&fitted).map(|(y, f)| y - f).collect();
        work.set_targets(residuals);
        let tree = cart_fit(&work, &cart)?;
        for (r, f) in fitted.iter_mut().enumerate() {
            *f += config.learning_rate * tree.predict_at(m, r as u32);
        }
        stages.push(tree);
    }
    Ok(GradientBoosting {
        config: *config,
        base,
        stages,
    })
}
