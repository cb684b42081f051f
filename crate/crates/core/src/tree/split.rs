//! Squared-error split search shared by every tree learner.
//!
//! Numeric candidates are midpoints between consecutive distinct values in
//! the node; when a node holds more than [`MAX_THRESHOLD_CANDIDATES`]
//! distinct values, only the boundaries at positions `k * n / 65`
//! (`k = 1..=64`) of the sorted node are tried. Categorical candidates are
//! the prefix partitions of the node's categories ordered by mean target,
//! which contain the squared-error optimum. Ties (within a relative
//! `1e-10` of the node SSE) go to the lowest slot, then the lowest
//! threshold or shortest prefix.

use serde::{Deserialize, Serialize};

use super::matrix::TrainMatrix;
use crate::features::SlotKind;

pub const MAX_THRESHOLD_CANDIDATES: usize = 64;

const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// `value <= threshold` goes left.
    Threshold(f64),
    /// Listed codes go left, every other code goes right.
    Categories(Vec<u32>),
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        match self {
            SplitRule::Threshold(t) => value <= *t,
            SplitRule::Categories(codes) => codes.contains(&(value as u32)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDecision {
    pub slot: usize,
    pub rule: SplitRule,
    pub sse_before: f64,
    pub sse_after: f64,
    pub left_count: usize,
    pub right_count: usize,
}

impl SplitDecision {
    pub fn gain(&self) -> f64 {
        self.sse_before - self.sse_after
    }
}

/// Rows with equal value (numeric) or equal code (categorical).
#[derive(Debug, Clone, Copy)]
struct Group {
    key: f64,
    count: usize,
    /// Sum of targets centred on the node mean.
    sum: f64,
}

struct Best {
    gain: f64,
    slot: usize,
    rule: SplitRule,
    left_count: usize,
}

/// Best binary split of `rows` over `slots`, or `None` when no candidate
/// leaves `min_leaf` rows on both sides while reducing SSE.
pub fn best_split(m: &TrainMatrix, rows: &[u32], slots: &[usize], min_leaf: usize) -> Option<SplitDecision> {
    let min_leaf = min_leaf.max(1);
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let mean = rows.iter().map(|&r| m.target(r)).sum::<f64>() / n as f64;
    let sse_before: f64 = rows
        .iter()
        .map(|&r| {
            let d = m.target(r) - mean;
            d * d
        })
        .sum();
    let tol = TIE_TOLERANCE * sse_before;
    if sse_before <= 0.0 {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| m.target(r) - mean).sum();

    let mut ordered = slots.to_vec();
    ordered.sort_unstable();
    ordered.dedup();

    let mut best: Option<Best> = None;
    for slot in ordered {
        let (groups, candidates) = match m.kind(slot) {
            SlotKind::Numeric => {
                let groups = numeric_groups(m, rows, slot, mean);
                let cuts = numeric_cuts(&groups, n);
                (groups, cuts)
            }
            SlotKind::Categorical { cardinality } => {
                let groups = categorical_groups(m, rows, slot, mean, cardinality);
                let cuts = (0..groups.len().saturating_sub(1)).collect();
                (groups, cuts)
            }
        };
        let mut prefix_count = Vec::with_capacity(groups.len());
        let mut prefix_sum = Vec::with_capacity(groups.len());
        let (mut c, mut s) = (0usize, 0.0);
        for g in &groups {
            c += g.count;
            s += g.sum;
            prefix_count.push(c);
            prefix_sum.push(s);
        }
        for j in candidates {
            let lc = prefix_count[j];
            let rc = n - lc;
            if lc < min_leaf || rc < min_leaf {
                continue;
            }
            let sl = prefix_sum[j];
            let sr = total - sl;
            let gain = sl * sl / lc as f64 + sr * sr / rc as f64;
            let threshold = best.as_ref().map_or(tol, |b| b.gain + tol);
            if gain > threshold {
                let rule = match m.kind(slot) {
                    SlotKind::Numeric => SplitRule::Threshold((groups[j].key + groups[j + 1].key) / 2.0),
                    SlotKind::Categorical { .. } => {
                        let mut codes: Vec<u32> = groups[..=j].iter().map(|g| g.key as u32).collect();
                        codes.sort_unstable();
                        SplitRule::Categories(codes)
                    }
                };
                best = Some(Best {
                    gain,
                    slot,
                    rule,
                    left_count: lc,
                });
            }
        }
    }
    best.map(|b| SplitDecision {
        slot: b.slot,
        rule: b.rule,
        sse_before,
        sse_after: (sse_before - b.gain).max(0.0),
        left_count: b.left_count,
        right_count: n - b.left_count,
    })
}

fn numeric_groups(m: &TrainMatrix, rows: &[u32], slot: usize, mean: f64) -> Vec<Group> {
    let values = m.distinct(slot);
    let n = rows.len() as f64;
    let mut groups = Vec::new();
    if n * n.log2().max(1.0) >= values.len() as f64 {
        let mut counts = vec![0usize; values.len()];
        let mut sums = vec![0.0; values.len()];
        for &r in rows {
            let b = m.bin(r, slot) as usize;
            counts[b] += 1;
            sums[b] += m.target(r) - mean;
        }
        for (b, (&count, &sum)) in counts.iter().zip(&sums).enumerate() {
            if count > 0 {
                groups.push(Group {
                    key: values[b],
                    count,
                    sum,
                });
            }
        }
    } else {
        let mut keyed: Vec<(u32, f64)> = rows.iter().map(|&r| (m.bin(r, slot), m.target(r) - mean)).collect();
        // stable, so per-group summation order matches the histogram path
        keyed.sort_by_key(|&(b, _)| b);
        for (b, y) in keyed {
            match groups.last_mut() {
                Some(g) if g.key == values[b as usize] => {
                    g.count += 1;
                    g.sum += y;
                }
                _ => groups.push(Group {
                    key: values[b as usize],
                    count: 1,
                    sum: y,
                }),
            }
        }
    }
    groups
}

/// Indices `j` of candidate boundaries between `groups[j]` and `groups[j + 1]`.
fn numeric_cuts(groups: &[Group], n: usize) -> Vec<usize> {
    if groups.len() <= MAX_THRESHOLD_CANDIDATES {
        return (0..groups.len().saturating_sub(1)).collect();
    }
    let mut cumulative = Vec::with_capacity(groups.len());
    let mut c = 0;
    for g in groups {
        c += g.count;
        cumulative.push(c);
    }
    let mut cuts: Vec<usize> = Vec::with_capacity(MAX_THRESHOLD_CANDIDATES);
    for k in 1..=MAX_THRESHOLD_CANDIDATES {
        let pos = k * n / (MAX_THRESHOLD_CANDIDATES + 1);
        let j = cumulative.partition_point(|&c| c <= pos);
        if j + 1 < groups.len() && cuts.last() != Some(&j) {
            cuts.push(j);
        }
    }
    cuts
}

fn categorical_groups(m: &TrainMatrix, rows: &[u32], slot: usize, mean: f64, cardinality: u32) -> Vec<Group> {
    let mut counts = vec![0usize; cardinality as usize];
    let mut sums = vec![0.0; cardinality as usize];
    for &r in rows {
        let code = m.value(r, slot) as usize;
        counts[code] += 1;
        sums[code] += m.target(r) - mean;
    }
    let mut groups: Vec<Group> = counts
        .iter()
        .zip(&sums)
        .enumerate()
        .filter(|(_, (&count, _))| count > 0)
        .map(|(code, (&count, &sum))| Group {
            key: code as f64,
            count,
            sum,
        })
        .collect();
    groups.sort_by(|a, b| {
        (a.sum / a.count as f64)
            .total_cmp(&(b.sum / b.count as f64))
            .then(a.key.total_cmp(&b.key))
    });
    groups
}

/// Splits `rows` by the rule, keeping relative order.
pub fn partition_rows(m: &TrainMatrix, rows: &[u32], slot: usize, rule: &SplitRule) -> (Vec<u32>, Vec<u32>) {
    rows.iter().partition(|&&r| rule.goes_left(m.value(r, slot)))
}
