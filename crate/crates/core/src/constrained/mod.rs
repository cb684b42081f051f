//! Level-uniform regression tree: every node at depth `d` splits on the
//! same slot `schedule[d]`, leaves hold at least `min_bucket` examples and
//! predict `alpha + beta * surface`.

pub mod audit;
mod config;
mod leaf;
mod repair;
mod search;

use serde::{Deserialize, Serialize};

pub use config::{
    validate_household_schedule, ConstrainedTreeConfig, HouseholdLabels, ScheduleChoice, ScheduleKeyword,
    DEFAULT_MIN_BUCKET, DEFAULT_SCHEDULE, SCHEDULE_CANDIDATES,
};
pub use leaf::{fit_leaf_linear, LeafLinear, LeafModel};
pub use repair::repair_surface_chains;
pub use search::{schedule_space_size, search_schedule, Candidate, SearchMode, DEFAULT_EXHAUSTIVE_CAP};

use crate::error::{Error, Result};
use crate::features::SlotKind;
use crate::tree::{best_split, partition_rows, SplitRule, TrainMatrix, MAX_THRESHOLD_CANDIDATES};

pub const MAX_LEVELS: usize = 7;

const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Each node picks its own threshold or subset for the level's slot.
    #[default]
    PerNode,
    /// One rule per level, applied by every node that can use it.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelParams {
    pub min_bucket: usize,
    pub leaf_model: LeafModel,
    pub threshold_mode: ThresholdMode,
    pub surface_slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum LevelNode {
    Leaf {
        /// Left-to-right position among the leaves.
        id: usize,
        leaf: LeafLinear,
    },
    Split {
        level: usize,
        slot: usize,
        rule: SplitRule,
        support: usize,
        left: Box<LevelNode>,
        right: Box<LevelNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedTree {
    /// Slot used at each level.
    pub levels: Vec<usize>,
    pub surface_slot: usize,
    pub min_bucket: usize,
    pub leaf_model: LeafModel,
    pub threshold_mode: ThresholdMode,
    /// Household predictions take the running minimum over larger
    /// surfaces (see `ForecastModel::predict_raw`); slot-level `predict`
    /// ignores it.
    #[serde(default)]
    pub monotone_surface: bool,
    pub root: LevelNode,
}

/// Names used when rendering rules.
pub trait SlotLabels {
    fn slot_name(&self, slot: usize) -> String;
    fn category_label(&self, slot: usize, code: u32) -> String;
}

/// `x0`, `x1`, … with raw category codes.
pub struct IndexLabels;

impl SlotLabels for IndexLabels {
    fn slot_name(&self, slot: usize) -> String {
        format!("x{slot}")
    }

    fn category_label(&self, _slot: usize, code: u32) -> String {
        code.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub level: usize,
    pub feature: String,
    /// The node's test, e.g. `occupants ≤ 2.5`.
    pub rule: String,
    pub branch: Branch,
}

impl TraceStep {
    pub fn render(&self) -> String {
        let b = match self.branch {
            Branch::Left => "left",
            Branch::Right => "right",
        };
        format!("{} → {b}", self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationTrace {
    pub steps: Vec<TraceStep>,
    pub leaf_id: usize,
    pub alpha: f64,
    pub beta: f64,
    pub surface: f64,
    /// `beta * surface`
    pub surface_term: f64,
    /// `alpha + surface_term`
    pub prediction: f64,
    /// Set when a larger surface gave a lower value and the prediction
    /// was held at it; `alpha` is then that value and `beta` is 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held: Option<SurfaceHold>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceHold {
    pub surface: f64,
    pub leaf_id: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl ExplanationTrace {
    /// One line per step and a final `leaf:` line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&s.render());
            out.push('\n');
        }
        out.push_str(&format!(
            "leaf: alpha + beta×surface = {} + {}×{} = {}\n",
            self.alpha, self.beta, self.surface, self.prediction
        ));
        if let Some(h) = &self.held {
            out.push_str(&format!(
                "held at surface {}: leaf {} gives {} + {}×{} = {}\n",
                h.surface, h.leaf_id, h.alpha, h.beta, h.surface, self.prediction
            ));
        }
        out
    }

    /// Replaces the leaf line by the constant `value` taken from `hold`.
    pub fn hold(mut self, hold: SurfaceHold, value: f64) -> Self {
        self.alpha = value;
        self.beta = 0.0;
        self.surface_term = 0.0;
        self.prediction = value;
        self.held = Some(hold);
        self
    }
}

pub fn render_rule(rule: &SplitRule, slot: usize, labels: &dyn SlotLabels) -> String {
    let name = labels.slot_name(slot);
    match rule {
        SplitRule::Threshold(t) => format!("{name} ≤ {t}"),
        SplitRule::Categories(codes) => {
            let listed: Vec<String> = codes.iter().map(|&c| labels.category_label(slot, c)).collect();
            format!("{name} ∈ {{{}}}", listed.join(", "))
        }
    }
}

impl ConstrainedTree {
    fn leaf_for(&self, row: &[f64]) -> &LevelNode {
        let mut node = &self.root;
        while let LevelNode::Split {
            slot,
            rule,
            left,
            right,
            ..
        } = node
        {
            node = if rule.goes_left(row[*slot]) { left } else { right };
        }
        node
    }

    /// Left-to-right position of the leaf `row` falls in.
    pub fn leaf_id(&self, row: &[f64]) -> usize {
        match self.leaf_for(row) {
            LevelNode::Leaf { id, .. } => *id,
            LevelNode::Split { .. } => unreachable!(),
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.leaf_for(row) {
            LevelNode::Leaf { leaf, .. } => leaf.predict(row[self.surface_slot]),
            LevelNode::Split { .. } => unreachable!(),
        }
    }

    pub fn predict_explain(&self, row: &[f64], labels: &dyn SlotLabels) -> (f64, ExplanationTrace) {
        let mut steps = Vec::new();
        let mut node = &self.root;
        loop {
            match node {
                LevelNode::Split {
                    level,
                    slot,
                    rule,
                    left,
                    right,
                    ..
                } => {
                    let goes_left = rule.goes_left(row[*slot]);
                    steps.push(TraceStep {
                        level: *level,
                        feature: labels.slot_name(*slot),
                        rule: render_rule(rule, *slot, labels),
                        branch: if goes_left { Branch::Left } else { Branch::Right },
                    });
                    node = if goes_left { left } else { right };
                }
                LevelNode::Leaf { id, leaf } => {
                    let surface = row[self.surface_slot];
                    let surface_term = leaf.beta * surface;
                    let prediction = leaf.alpha + surface_term;
                    let trace = ExplanationTrace {
                        steps,
                        leaf_id: *id,
                        alpha: leaf.alpha,
                        beta: leaf.beta,
                        surface,
                        surface_term,
                        prediction,
                        held: None,
                    };
                    return (prediction, trace);
                }
            }
        }
    }

    /// Sorted distinct thresholds of the splits on the surface slot.
    pub fn surface_thresholds(&self) -> Vec<f64> {
        fn walk(n: &LevelNode, surface: usize, out: &mut Vec<f64>) {
            if let LevelNode::Split {
                slot,
                rule,
                left,
                right,
                ..
            } = n
            {
                if let (true, SplitRule::Threshold(t)) = (*slot == surface, rule) {
                    out.push(*t);
                }
                walk(left, surface, out);
                walk(right, surface, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, self.surface_slot, &mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn leaves(&self) -> Vec<&LeafLinear> {
        fn walk<'a>(n: &'a LevelNode, out: &mut Vec<&'a LeafLinear>) {
            match n {
                LevelNode::Leaf { leaf, .. } => out.push(leaf),
                LevelNode::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &LevelNode) -> usize {
            match n {
                LevelNode::Leaf { .. } => 0,
                LevelNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }

    /// Every split at depth `d` records level `d` and uses `levels[d]`.
    pub fn is_level_uniform(&self) -> bool {
        fn walk(n: &LevelNode, depth: usize, levels: &[usize]) -> bool {
            match n {
                LevelNode::Leaf { .. } => true,
                LevelNode::Split {
                    level,
                    slot,
                    left,
                    right,
                    ..
                } => {
                    *level == depth
                        && levels.get(depth) == Some(slot)
                        && walk(left, depth + 1, levels)
                        && walk(right, depth + 1, levels)
                }
            }
        }
        walk(&self.root, 0, &self.levels)
    }

    pub fn training_sse(&self, m: &TrainMatrix) -> f64 {
        m.all_rows()
            .into_iter()
            .map(|r| (m.target(r) - self.predict(&m.row(r))).powi(2))
            .sum()
    }
}

/// Level-by-level growth state: leaves still allowed to split, and leaves
/// that stopped early.
#[derive(Debug, Clone)]
pub(crate) struct Partition {
    pub open: Vec<Vec<u32>>,
    pub closed: Vec<Vec<u32>>,
}

impl Partition {
    pub fn root(m: &TrainMatrix) -> Self {
        Self {
            open: vec![m.all_rows()],
            closed: Vec::new(),
        }
    }

    pub fn leaves(&self) -> Vec<&[u32]> {
        self.closed.iter().chain(&self.open).map(Vec::as_slice).collect()
    }

    pub fn extend(&self, m: &TrainMatrix, slot: usize, params: &LevelParams) -> Partition {
        let open: Vec<&[u32]> = self.open.iter().map(Vec::as_slice).collect();
        let rules = level_rules(m, &open, slot, params);
        let mut next = Partition {
            open: Vec::new(),
            closed: self.closed.clone(),
        };
        for (rows, rule) in self.open.iter().zip(rules) {
            match rule {
                Some(rule) => {
                    let (l, r) = partition_rows(m, rows, slot, &rule);
                    next.open.push(l);
                    next.open.push(r);
                }
                None => next.closed.push(rows.clone()),
            }
        }
        next
    }

    /// Training SSE after fitting the leaf model on every part.
    pub fn sse(&self, m: &TrainMatrix, params: &LevelParams) -> f64 {
        leaf::fit_leaves(m, params.surface_slot, &self.leaves(), params.leaf_model).1
    }
}

/// The rule each open node uses at this level, `None` for nodes that stop.
fn level_rules(m: &TrainMatrix, open: &[&[u32]], slot: usize, params: &LevelParams) -> Vec<Option<SplitRule>> {
    match params.threshold_mode {
        ThresholdMode::PerNode => open
            .iter()
            .map(|rows| best_split(m, rows, &[slot], params.min_bucket).map(|d| d.rule))
            .collect(),
        ThresholdMode::Shared => {
            let Some(rule) = shared_rule(m, open, slot, params.min_bucket) else {
                return vec![None; open.len()];
            };
            open.iter()
                .map(|rows| node_gain(m, rows, slot, &rule, params.min_bucket).map(|_| rule.clone()))
                .collect()
        }
    }
}

/// SSE decrease from applying `rule` to `rows`, if both sides keep
/// `min_bucket` rows and the decrease is positive.
fn node_gain(m: &TrainMatrix, rows: &[u32], slot: usize, rule: &SplitRule, min_bucket: usize) -> Option<f64> {
    let min_bucket = min_bucket.max(1);
    let n = rows.len();
    let mean = rows.iter().map(|&r| m.target(r)).sum::<f64>() / n as f64;
    let (mut lc, mut ls, mut total, mut sse) = (0usize, 0.0, 0.0, 0.0);
    for &r in rows {
        let d = m.target(r) - mean;
        total += d;
        sse += d * d;
        if rule.goes_left(m.value(r, slot)) {
            lc += 1;
            ls += d;
        }
    }
    let rc = n - lc;
    if lc < min_bucket || rc < min_bucket {
        return None;
    }
    let rs = total - ls;
    let gain = ls * ls / lc as f64 + rs * rs / rc as f64;
    (gain > TIE_TOLERANCE * sse).then_some(gain)
}

/// Candidate rules from the pooled rows of every open node, scored by the
/// total SSE decrease over the nodes that can apply them.
fn shared_rule(m: &TrainMatrix, open: &[&[u32]], slot: usize, min_bucket: usize) -> Option<SplitRule> {
    let pooled: Vec<u32> = open.iter().flat_map(|rows| rows.iter().copied()).collect();
    let candidates: Vec<SplitRule> = match m.kind(slot) {
        SlotKind::Numeric => {
            let mut values: Vec<f64> = pooled.iter().map(|&r| m.value(r, slot)).collect();
            values.sort_by(f64::total_cmp);
            let mut distinct = values.clone();
            distinct.dedup();
            if distinct.len() <= MAX_THRESHOLD_CANDIDATES {
                distinct
                    .windows(2)
                    .map(|w| SplitRule::Threshold((w[0] + w[1]) / 2.0))
                    .collect()
            } else {
                let n = values.len();
                let mut cuts: Vec<SplitRule> = Vec::new();
                for k in 1..=MAX_THRESHOLD_CANDIDATES {
                    let pos = k * n / (MAX_THRESHOLD_CANDIDATES + 1);
                    let lo = values[pos.min(n - 1)];
                    if let Some(&hi) = distinct.iter().find(|&&v| v > lo) {
                        let rule = SplitRule::Threshold((lo + hi) / 2.0);
                        if cuts.last() != Some(&rule) {
                            cuts.push(rule);
                        }
                    }
                }
                cuts
            }
        }
        SlotKind::Categorical { cardinality } => {
            let mut counts = vec![0usize; cardinality as usize];
            let mut sums = vec![0.0; cardinality as usize];
            for &r in &pooled {
                let c = m.value(r, slot) as usize;
                counts[c] += 1;
                sums[c] += m.target(r);
            }
            let mut present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
            present.sort_by(|&a, &b| {
                (sums[a] / counts[a] as f64)
                    .total_cmp(&(sums[b] / counts[b] as f64))
                    .then(a.cmp(&b))
            });
            (1..present.len())
                .map(|k| {
                    let mut codes: Vec<u32> = present[..k].iter().map(|&c| c as u32).collect();
                    codes.sort_unstable();
                    SplitRule::Categories(codes)
                })
                .collect()
        }
    };
    let total_sse: f64 = open
        .iter()
        .map(|rows| crate::tree::sse(rows.iter().map(|&r| m.target(r))))
        .sum();
    let tol = TIE_TOLERANCE * total_sse;
    let mut best: Option<(f64, SplitRule)> = None;
    for rule in candidates {
        let gain: f64 = open
            .iter()
            .filter_map(|rows| node_gain(m, rows, slot, &rule, min_bucket))
            .sum();
        let bar = best.as_ref().map_or(tol, |(g, _)| g + tol);
        if gain > bar {
            best = Some((gain, rule));
        }
    }
    best.map(|(_, rule)| rule)
}

enum Building {
    Leaf(Vec<u32>),
    Split {
        level: usize,
        slot: usize,
        rule: SplitRule,
        support: usize,
        left: usize,
        right: usize,
    },
}

pub fn validate_schedule(schedule: &[usize], m: &TrainMatrix) -> Result<()> {
    if schedule.len() > MAX_LEVELS {
        return Err(Error::Config(format!(
            "schedule has {} levels, at most {MAX_LEVELS} allowed",
            schedule.len()
        )));
    }
    if let Some(&bad) = schedule.iter().find(|&&s| s >= m.n_slots()) {
        return Err(Error::Config(format!("schedule slot {bad} out of range")));
    }
    Ok(())
}

/// Grows the tree for a fixed schedule.
pub fn fit_with_schedule(m: &TrainMatrix, schedule: &[usize], params: &LevelParams) -> Result<ConstrainedTree> {
    validate_schedule(schedule, m)?;
    if params.min_bucket == 0 {
        return Err(Error::Config("min_bucket must be at least 1".into()));
    }
    if params.surface_slot >= m.n_slots() || m.kind(params.surface_slot) != SlotKind::Numeric {
        return Err(Error::Config("surface slot must be a numeric slot".into()));
    }
    if m.n_rows() < params.min_bucket {
        return Err(Error::Config(format!(
            "training set has {} rows, fewer than min_bucket = {}",
            m.n_rows(),
            params.min_bucket
        )));
    }

    let mut nodes = vec![Building::Leaf(m.all_rows())];
    let mut open = vec![0usize];
    for (level, &slot) in schedule.iter().enumerate() {
        let rules = {
            let rows: Vec<&[u32]> = open
                .iter()
                .map(|&i| match &nodes[i] {
                    Building::Leaf(rows) => rows.as_slice(),
                    Building::Split { .. } => unreachable!("open nodes are leaves"),
                })
                .collect();
            level_rules(m, &rows, slot, params)
        };
        let mut next = Vec::new();
        for (id, rule) in open.into_iter().zip(rules) {
            let Some(rule) = rule else { continue };
            let Building::Leaf(rows) = std::mem::replace(&mut nodes[id], Building::Leaf(Vec::new())) else {
                unreachable!()
            };
            let (l, r) = partition_rows(m, &rows, slot, &rule);
            let left = nodes.len();
            nodes.push(Building::Leaf(l));
            nodes.push(Building::Leaf(r));
            nodes[id] = Building::Split {
                level,
                slot,
                rule,
                support: rows.len(),
                left,
                right: left + 1,
            };
            next.push(left);
            next.push(left + 1);
        }
        open = next;
    }

    fn leaf_order(nodes: &[Building], id: usize, out: &mut Vec<usize>) {
        match &nodes[id] {
            Building::Leaf(_) => out.push(id),
            Building::Split { left, right, .. } => {
                leaf_order(nodes, *left, out);
                leaf_order(nodes, *right, out);
            }
        }
    }
    let mut order = Vec::new();
    leaf_order(&nodes, 0, &mut order);
    let leaf_rows: Vec<&[u32]> = order
        .iter()
        .map(|&i| match &nodes[i] {
            Building::Leaf(rows) => rows.as_slice(),
            Building::Split { .. } => unreachable!(),
        })
        .collect();
    let (fits, _) = leaf::fit_leaves(m, params.surface_slot, &leaf_rows, params.leaf_model);

    fn assemble(nodes: &[Building], id: usize, order: &[usize], fits: &[LeafLinear]) -> LevelNode {
        match &nodes[id] {
            Building::Leaf(_) => {
                let pos = order.iter().position(|&o| o == id).expect("leaf in order");
                LevelNode::Leaf {
                    id: pos,
                    leaf: fits[pos],
                }
            }
            Building::Split {
                level,
                slot,
                rule,
                support,
                left,
                right,
            } => LevelNode::Split {
                level: *level,
                slot: *slot,
                rule: rule.clone(),
                support: *support,
                left: Box::new(assemble(nodes, *left, order, fits)),
                right: Box::new(assemble(nodes, *right, order, fits)),
            },
        }
    }

    Ok(ConstrainedTree {
        levels: schedule.to_vec(),
        surface_slot: params.surface_slot,
        min_bucket: params.min_bucket,
        leaf_model: params.leaf_model,
        threshold_mode: params.threshold_mode,
        monotone_surface: false,
        root: assemble(&nodes, 0, &order, &fits),
    })
}
