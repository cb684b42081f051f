use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::{encode, slot_kinds, LowConsumptionRule, SlotKind};

/// Column-major training table.
///
/// Numeric columns are also pre-binned: `bins[slot][row]` indexes the
/// sorted distinct values `distinct[slot]`, which lets split search group
/// a node's rows by value without re-sorting floats.
#[derive(Debug, Clone)]
pub struct TrainMatrix {
    kinds: Vec<SlotKind>,
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
    distinct: Vec<Vec<f64>>,
    bins: Vec<Vec<u32>>,
}

impl TrainMatrix {
    /// Categorical columns must hold codes `0..cardinality`.
    pub fn new(kinds: Vec<SlotKind>, columns: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if kinds.len() != columns.len() {
            return Err(Error::Config(format!(
                "{} slot kinds for {} columns",
                kinds.len(),
                columns.len()
            )));
        }
        let n = targets.len();
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("targets must be finite".into()));
        }
        let mut distinct = Vec::with_capacity(columns.len());
        let mut bins = Vec::with_capacity(columns.len());
        for (slot, (kind, col)) in kinds.iter().zip(&columns).enumerate() {
            if col.len() != n {
                return Err(Error::Config(format!(
                    "column {slot} has {} rows, expected {n}",
                    col.len()
                )));
            }
            match kind {
                SlotKind::Numeric => {
                    if col.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Config(format!("column {slot} has non-finite values")));
                    }
                    let mut values = col.clone();
                    values.sort_by(f64::total_cmp);
                    values.dedup();
                    let b = col.iter().map(|v| values.partition_point(|d| d < v) as u32).collect();
                    distinct.push(values);
                    bins.push(b);
                }
                SlotKind::Categorical { cardinality } => {
                    let c = f64::from(*cardinality);
                    if col.iter().any(|&v| v < 0.0 || v >= c || v.fract() != 0.0) {
                        return Err(Error::Config(format!(
                            "column {slot} has codes outside 0..{cardinality}"
                        )));
                    }
                    distinct.push(Vec::new());
                    bins.push(Vec::new());
                }
            }
        }
        Ok(Self {
            kinds,
            columns,
            targets,
            distinct,
            bins,
        })
    }

    pub fn from_dataset(ds: &Dataset, rule: &LowConsumptionRule) -> Result<Self> {
        let kinds = slot_kinds();
        let mut columns = vec![Vec::with_capacity(ds.len()); kinds.len()];
        for e in ds.iter() {
            let v = encode(&e.record, rule);
            for (col, x) in columns.iter_mut().zip(v.as_slice()) {
                col.push(*x);
            }
        }
        Self::new(kinds, columns, ds.targets())
    }

    /// Swap in new targets over the same features (boosting residuals).
    pub fn set_targets(&mut self, targets: Vec<f64>) {
        assert_eq!(targets.len(), self.targets.len());
        assert!(targets.iter().all(|t| t.is_finite()));
        self.targets = targets;
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_slots(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[SlotKind] {
        &self.kinds
    }

    pub fn kind(&self, slot: usize) -> SlotKind {
        self.kinds[slot]
    }

    pub fn column(&self, slot: usize) -> &[f64] {
        &self.columns[slot]
    }

    pub fn value(&self, row: u32, slot: usize) -> f64 {
        self.columns[slot][row as usize]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target(&self, row: u32) -> f64 {
        self.targets[row as usize]
    }

    pub fn row(&self, row: u32) -> Vec<f64> {
        self.columns.iter().map(|c| c[row as usize]).collect()
    }

    pub(crate) fn distinct(&self, slot: usize) -> &[f64] {
        &self.distinct[slot]
    }

    pub(crate) fn bin(&self, row: u32, slot: usize) -> u32 {
        self.bins[slot][row as usize]
    }

    pub fn all_rows(&self) -> Vec<u32> {
        (0..self.n_rows() as u32).collect()
    }
}

/// Sum of squared deviations from the mean.
pub fn sse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum()
}

pub fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
