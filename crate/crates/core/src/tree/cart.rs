use serde::{Deserialize, Serialize};

use super::matrix::{mean, TrainMatrix};
use super::split::{best_split, partition_rows, SplitRule};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartConfig {
    /// `None` grows until `min_leaf` or zero gain stops it.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for CartConfig {
    fn default() -> Self {
        Self {
            max_depth: Some(8),
            min_leaf: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum CartNode {
    Leaf {
        value: f64,
        support: usize,
    },
    Split {
        slot: usize,
        rule: SplitRule,
        /// Training SSE removed by this split.
        gain: f64,
        support: usize,
        left: Box<CartNode>,
        right: Box<CartNode>,
    },
}

impl CartNode {
    pub fn support(&self) -> usize {
        match self {
            CartNode::Leaf { support, .. } | CartNode::Split { support, .. } => *support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    pub config: CartConfig,
    pub root: CartNode,
}

/// Random subset of slots drawn at every split, as in random forests.
pub struct FeatureSampling {
    pub rng: SplitMix64,
    pub per_split: usize,
}

impl FeatureSampling {
    fn draw(&mut self, n_slots: usize) -> Vec<usize> {
        let k = self.per_split.min(n_slots);
        let mut pool: Vec<usize> = (0..n_slots).collect();
        for i in 0..k {
            let j = i + self.rng.below(n_slots - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}

pub fn cart_fit(m: &TrainMatrix, config: &CartConfig) -> Result<CartTree> {
    cart_fit_rows(m, m.all_rows(), config, None)
}

/// Grows a tree on `rows` (duplicates allowed, for bootstrap samples).
pub fn cart_fit_rows(
    m: &TrainMatrix,
    rows: Vec<u32>,
    config: &CartConfig,
    mut sampling: Option<FeatureSampling>,
) -> Result<CartTree> {
    if rows.is_empty() {
        return Err(Error::Empty("cannot fit a tree on an empty training set"));
    }
    let root = grow(m, rows, 0, config, &mut sampling);
    Ok(CartTree { config: *config, root })
}

fn grow(
    m: &TrainMatrix,
    rows: Vec<u32>,
    depth: usize,
    config: &CartConfig,
    sampling: &mut Option<FeatureSampling>,
) -> CartNode {
    let leaf = |rows: &[u32]| CartNode::Leaf {
        value: mean(rows.iter().map(|&r| m.target(r))),
        support: rows.len(),
    };
    if config.max_depth.is_some_and(|d| depth >= d) {
        return leaf(&rows);
    }
    let slots = match sampling {
        Some(s) => s.draw(m.n_slots()),
        None => (0..m.n_slots()).collect(),
    };
    let Some(decision) = best_split(m, &rows, &slots, config.min_leaf) else {
        return leaf(&rows);
    };
    let (left_rows, right_rows) = partition_rows(m, &rows, decision.slot, &decision.rule);
    let support = rows.len();
    drop(rows);
    let left = grow(m, left_rows, depth + 1, config, sampling);
    let right = grow(m, right_rows, depth + 1, config, sampling);
    CartNode::Split {
        slot: decision.slot,
        gain: decision.gain(),
        rule: decision.rule,
        support,
        left: Box::new(left),
        right: Box::new(right),
    }
}

impl CartTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                CartNode::Leaf { value, .. } => return *value,
                CartNode::Split {
                    slot,
                    rule,
                    left,
                    right,
                    ..
                } => {
                    node = if rule.goes_left(row[*slot]) { left } else { right };
                }
            }
        }
    }

    /// Same as [`predict`](Self::predict) for a training-matrix row.
    pub fn predict_at(&self, m: &TrainMatrix, row: u32) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                CartNode::Leaf { value, .. } => return *value,
                CartNode::Split {
                    slot,
                    rule,
                    left,
                    right,
                    ..
                } => {
                    node = if rule.goes_left(m.value(row, *slot)) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &CartNode) -> usize {
            match n {
                CartNode::Leaf { .. } => 0,
                CartNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }

    pub fn leaves(&self) -> Vec<&CartNode> {
        fn walk<'a>(n: &'a CartNode, out: &mut Vec<&'a CartNode>) {
            match n {
                CartNode::Leaf { .. } => out.push(n),
                CartNode::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Adds each split's gain to `totals[slot]`.
    pub fn accumulate_gains(&self, totals: &mut [f64]) {
        fn walk(n: &CartNode, totals: &mut [f64]) {
            if let CartNode::Split {
                slot,
                gain,
                left,
                right,
                ..
            } = n
            {
                totals[*slot] += gain;
                walk(left, totals);
                walk(right, totals);
            }
        }
        walk(&self.root, totals);
    }
}
