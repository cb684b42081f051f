//! Pool-adjacent-violators over leaf lines along surface chains.
//!
//! A chain is a maximal subtree whose splits all test the surface slot;
//! its leaves, read left to right, cover consecutive surface intervals.
//! Where one leaf's line ends above the next leaf's line at their shared
//! threshold, the two are merged into one line refitted on their pooled
//! rows, and merging repeats until the chain is non-decreasing.

use super::leaf::fit_leaf_linear;
use super::{ConstrainedTree, LeafLinear, LeafModel, LevelNode};
use crate::tree::{SplitRule, TrainMatrix};

struct Block {
    /// Positions in the chain.
    first: usize,
    last: usize,
    line: LeafLinear,
}

fn all_surface(n: &LevelNode, surface: usize) -> bool {
    match n {
        LevelNode::Leaf { .. } => true,
        LevelNode::Split {
            slot,
            rule,
            left,
            right,
            ..
        } => {
            *slot == surface
                && matches!(rule, SplitRule::Threshold(_))
                && all_surface(left, surface)
                && all_surface(right, surface)
        }
    }
}

/// Leaf ids in order, and the threshold between each consecutive pair.
fn chain(n: &LevelNode, ids: &mut Vec<usize>, cuts: &mut Vec<f64>) {
    match n {
        LevelNode::Leaf { id, .. } => ids.push(*id),
        LevelNode::Split { rule, left, right, .. } => {
            chain(left, ids, cuts);
            if let SplitRule::Threshold(t) = rule {
                cuts.push(*t);
            }
            chain(right, ids, cuts);
        }
    }
}

fn chains(n: &LevelNode, surface: usize, out: &mut Vec<(Vec<usize>, Vec<f64>)>) {
    if let LevelNode::Split { left, right, .. } = n {
        if all_surface(n, surface) {
            let (mut ids, mut cuts) = (Vec::new(), Vec::new());
            chain(n, &mut ids, &mut cuts);
            out.push((ids, cuts));
        } else {
            chains(left, surface, out);
            chains(right, surface, out);
        }
    }
}

fn set_leaves(n: &mut LevelNode, lines: &[LeafLinear]) {
    match n {
        LevelNode::Leaf { id, leaf } => {
            let support = leaf.support;
            *leaf = LeafLinear { support, ..lines[*id] };
        }
        LevelNode::Split { left, right, .. } => {
            set_leaves(left, lines);
            set_leaves(right, lines);
        }
    }
}

/// Refit of one line over the pooled rows. A global-surface tree keeps
/// its shared slope and refits the intercept only.
fn pooled_fit(m: &TrainMatrix, surface: usize, rows: &[u32], model: LeafModel, shared_beta: f64) -> LeafLinear {
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(u32) -> f64| rows.iter().map(|&r| f(r)).sum::<f64>() / n;
    match model {
        LeafModel::Mean => LeafLinear {
            alpha: mean(&|r| m.target(r)),
            beta: 0.0,
            support: rows.len(),
        },
        LeafModel::GlobalSurface => LeafLinear {
            alpha: mean(&|r| m.target(r) - shared_beta * m.value(r, surface)).max(0.0),
            beta: shared_beta,
            support: rows.len(),
        },
        LeafModel::SurfaceLinear => {
            let (s, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|&r| (m.value(r, surface), m.target(r))).unzip();
            fit_leaf_linear(&s, &y)
        }
    }
}

/// Merges adjacent leaves along every surface chain until each chain is
/// non-decreasing at its thresholds. Returns the number of merges.
pub fn repair_surface_chains(tree: &mut ConstrainedTree, m: &TrainMatrix) -> usize {
    let surface = tree.surface_slot;
    let mut found = Vec::new();
    chains(&tree.root, surface, &mut found);
    if found.is_empty() {
        return 0;
    }
    let n_leaves = tree.leaves().len();
    let mut rows_of: Vec<Vec<u32>> = vec![Vec::new(); n_leaves];
    for r in m.all_rows() {
        rows_of[tree.leaf_id(&m.row(r))].push(r);
    }
    let mut lines: Vec<LeafLinear> = tree.leaves().into_iter().copied().collect();
    let shared_beta = lines.first().map_or(0.0, |l| l.beta);
    let mut merges = 0;
    for (ids, cuts) in found {
        let mut stack: Vec<Block> = Vec::new();
        for (pos, &id) in ids.iter().enumerate() {
            stack.push(Block {
                first: pos,
                last: pos,
                line: lines[id],
            });
            while stack.len() >= 2 {
                let b = &stack[stack.len() - 1];
                let a = &stack[stack.len() - 2];
                let t = cuts[a.last];
                if a.line.predict(t) <= b.line.predict(t) {
                    break;
                }
                let (first, last) = (a.first, b.last);
                stack.truncate(stack.len() - 2);
                let pooled: Vec<u32> = ids[first..=last]
                    .iter()
                    .flat_map(|&i| rows_of[i].iter().copied())
                    .collect();
                let line = pooled_fit(m, surface, &pooled, tree.leaf_model, shared_beta);
                stack.push(Block { first, last, line });
                merges += 1;
            }
        }
        for b in stack {
            for &id in &ids[b.first..=b.last] {
                lines[id] = b.line;
            }
        }
    }
    set_leaves(&mut tree.root, &lines);
    merges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constrained::{fit_with_schedule, LevelParams, ThresholdMode};
    use crate::features::SlotKind;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn matrix(surfaces: Vec<f64>, targets: Vec<f64>) -> TrainMatrix {
        TrainMatrix::new(vec![SlotKind::Numeric], vec![surfaces], targets).unwrap()
    }

    fn params(min_bucket: usize, leaf_model: LeafModel) -> LevelParams {
        LevelParams {
            min_bucket,
            leaf_model,
            threshold_mode: ThresholdMode::PerNode,
            surface_slot: 0,
        }
    }

    fn non_decreasing(tree: &ConstrainedTree, lo: f64, hi: f64) -> bool {
        let grid: Vec<f64> = (0..=2000).map(|k| lo + (hi - lo) * f64::from(k) / 2000.0).collect();
        let mut points: Vec<f64> = grid.into_iter().chain(tree.surface_thresholds()).collect();
        points.extend(tree.surface_thresholds().iter().map(|t| t.next_up()));
        points.sort_by(f64::total_cmp);
        points
            .windows(2)
            .all(|w| tree.predict(&[w[0]]) <= tree.predict(&[w[1]]))
    }

    #[test]
    fn sawtooth_is_merged_into_a_rising_chain() {
        // Rises steeply to 1000 at 100 m², then restarts near 300.
        let s: Vec<f64> = (1..=200).map(f64::from).collect();
        let y: Vec<f64> = s
            .iter()
            .map(|&v| if v <= 100.0 { 10.0 * v } else { 300.0 + v })
            .collect();
        let m = matrix(s, y);
        let mut tree = fit_with_schedule(&m, &[0, 0], &params(20, LeafModel::SurfaceLinear)).unwrap();
        assert!(!non_decreasing(&tree, 1.0, 200.0));
        let supports: Vec<usize> = tree.leaves().iter().map(|l| l.support).collect();
        let merges = repair_surface_chains(&mut tree, &m);
        assert!(merges > 0);
        assert!(non_decreasing(&tree, 1.0, 200.0));
        assert_eq!(tree.leaves().iter().map(|l| l.support).collect::<Vec<_>>(), supports);
        assert!(tree.leaves().iter().all(|l| l.beta >= 0.0 && l.alpha >= 0.0));
    }

    #[test]
    fn rising_data_is_left_alone() {
        let s: Vec<f64> = (1..=200).map(f64::from).collect();
        let y: Vec<f64> = s
            .iter()
            .map(|&v| 50.0 * v + if v > 120.0 { 2000.0 } else { 0.0 })
            .collect();
        let m = matrix(s, y);
        let mut tree = fit_with_schedule(&m, &[0, 0], &params(20, LeafModel::SurfaceLinear)).unwrap();
        let before = tree.clone();
        assert_eq!(repair_surface_chains(&mut tree, &m), 0);
        assert_eq!(tree, before);
    }

    #[test]
    fn splits_on_other_slots_bound_the_chains() {
        // Slot 1 splits first; each side is repaired on its own.
        let n = 400;
        let s: Vec<f64> = (0..n).map(|i| f64::from(i % 200 + 1)).collect();
        let g: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i >= 200))).collect();
        let y: Vec<f64> = s
            .iter()
            .zip(&g)
            .map(|(&v, &k)| 5000.0 * k + if v <= 100.0 { 10.0 * v } else { 300.0 + v })
            .collect();
        let m = TrainMatrix::new(vec![SlotKind::Numeric, SlotKind::Numeric], vec![s, g], y).unwrap();
        let mut tree = fit_with_schedule(&m, &[1, 0, 0], &params(20, LeafModel::SurfaceLinear)).unwrap();
        repair_surface_chains(&mut tree, &m);
        for k in [0.0, 1.0] {
            let grid: Vec<f64> = (1..=400).map(|v| f64::from(v) * 0.5).collect();
            assert!(grid
                .windows(2)
                .all(|w| tree.predict(&[w[0], k]) <= tree.predict(&[w[1], k])));
        }
        assert!(tree.is_level_uniform());
    }

    #[test]
    fn mean_leaves_pool_to_the_mean() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let y: Vec<f64> = s.iter().map(|&v| if v <= 50.0 { 900.0 } else { 100.0 }).collect();
        let m = matrix(s, y);
        let mut tree = fit_with_schedule(&m, &[0], &params(10, LeafModel::Mean)).unwrap();
        repair_surface_chains(&mut tree, &m);
        assert!(tree.leaves().iter().all(|l| l.alpha == 500.0 && l.beta == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn repaired_chains_never_step_down(seed in any::<u64>(), levels in 1usize..=3, model in 0usize..3) {
            let mut rng = SplitMix64::new(seed);
            let n = 150;
            let s: Vec<f64> = (0..n).map(|_| 10.0 + 190.0 * rng.next_f64()).collect();
            let y: Vec<f64> = s.iter().map(|&v| 2000.0 * rng.next_f64() + 8.0 * v).collect();
            let m = matrix(s, y);
            let leaf_model = [LeafModel::Mean, LeafModel::SurfaceLinear, LeafModel::GlobalSurface][model];
            let mut tree = fit_with_schedule(&m, &vec![0; levels], &params(10, leaf_model)).unwrap();
            repair_surface_chains(&mut tree, &m);
            prop_assert!(non_decreasing(&tree, 10.0, 200.0));
            prop_assert!(tree.leaves().iter().all(|l| l.beta >= 0.0 && l.alpha >= 0.0 && l.support >= 10));
        }
    }
}
