use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tree::CartTree;

/// Split-gain share per slot: each slot's total training SSE decrease,
/// normalized to sum to 1. All zeros when the model never splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub weights: Vec<f64>,
}

impl FeatureImportance {
    pub fn from_trees<'a>(trees: impl IntoIterator<Item = &'a CartTree>, n_slots: usize) -> Self {
        let mut totals = vec![0.0; n_slots];
        for t in trees {
            t.accumulate_gains(&mut totals);
        }
        let sum: f64 = totals.iter().sum();
        if sum > 0.0 {
            for w in &mut totals {
                *w /= sum;
            }
        }
        Self { weights: totals }
    }

    /// `(slot, weight)` by descending weight, ties by slot order.
    pub fn ranked(&self) -> Vec<(usize, f64)> {
        let mut r: Vec<(usize, f64)> = self.weights.iter().copied().enumerate().collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        r
    }

    /// CSV with header `slot_name,weight`, descending.
    pub fn write_csv<W: Write>(&self, names: &[&str], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["slot_name", "weight"])?;
        for (slot, weight) in self.ranked() {
            w.write_record([names[slot].to_string(), weight.to_string()])?;
        }
        w.flush().map_err(|e| crate::Error::io("<importance csv>", e))?;
        Ok(())
    }
}
