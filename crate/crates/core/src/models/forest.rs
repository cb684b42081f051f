use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tree::{cart_fit_rows, CartConfig, CartTree, FeatureSampling, TrainMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    All,
    /// `ceil(sqrt(slots))`
    Sqrt,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, n_slots: usize) -> usize {
        match self {
            FeaturesPerSplit::All => n_slots,
            FeaturesPerSplit::Sqrt => (n_slots as f64).sqrt().ceil() as usize,
            FeaturesPerSplit::Count(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub features_per_split: FeaturesPerSplit,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            bootstrap: true,
            features_per_split: FeaturesPerSplit::Sqrt,
            max_depth: Some(16),
            min_leaf: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub config: ForestConfig,
    pub trees: Vec<CartTree>,
}

impl RandomForest {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Tree `i` draws its bootstrap sample and per-split slot subsets from
/// `SplitMix64::stream(seed, i)`, so trees can be grown in any order.
pub fn rf_fit(m: &TrainMatrix, config: &ForestConfig) -> Result<RandomForest> {
    let n = m.n_rows();
    if n == 0 {
        return Err(Error::Empty("cannot fit a forest on an empty training set"));
    }
    if config.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    let per_split = config.features_per_split.resolve(m.n_slots());
    if per_split == 0 || per_split > m.n_slots() {
        return Err(Error::Config(format!(
            "features_per_split must lie in 1..={}, got {per_split}",
            m.n_slots()
        )));
    }
    let cart = CartConfig {
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::stream(config.seed, i as u64);
            let rows = if config.bootstrap {
                (0..n).map(|_| rng.below(n) as u32).collect()
            } else {
                m.all_rows()
            };
            let sampling = (per_split < m.n_slots()).then_some(FeatureSampling { rng, per_split });
            cart_fit_rows(m, rows, &cart, sampling)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest { config: *config, trees })
}
