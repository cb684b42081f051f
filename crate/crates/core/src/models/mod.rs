//! Forecast models over household records and their JSON model files.
//!
//! A model file is one JSON object:
//!
//! ```text
//! {"format_version": 1, "feature_schema": "hearthcast.features.v1",
//!  "kind": "<kind>", "low_consumption_rule": {...}, "model": {...}}
//! ```

pub mod boost;
pub mod forest;
pub mod importance;
pub mod legacy;
pub mod linear;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::constrained::{ConstrainedTree, ConstrainedTreeConfig, ExplanationTrace, HouseholdLabels, SurfaceHold};
use crate::data::{AnnualConsumption, Dataset, HouseholdRecord};
use crate::error::{Error, Result};
use crate::features::{encode, LowConsumptionRule, Slot, FEATURE_SCHEMA, N_SLOTS};
use crate::tree::{cart_fit, CartConfig, CartTree, TrainMatrix};

pub use boost::{gbm_fit, BoostConfig, GradientBoosting};
pub use forest::{rf_fit, FeaturesPerSplit, ForestConfig, RandomForest};
pub use importance::FeatureImportance;
pub use legacy::LegacyTable;
pub use linear::{ols_fit, LinearModel, DEFAULT_RIDGE_EPSILON};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Legacy,
    Linear,
    Cart,
    RandomForest,
    GradientBoosting,
    ConstrainedTree,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Legacy,
        ModelKind::Linear,
        ModelKind::Cart,
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
        ModelKind::ConstrainedTree,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Legacy => "legacy",
            ModelKind::Linear => "linear",
            ModelKind::Cart => "cart",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoosting => "gradient_boosting",
            ModelKind::ConstrainedTree => "constrained_tree",
        }
    }

    /// Column heading used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Legacy => "Legacy",
            ModelKind::Linear => "Linear Regression",
            ModelKind::Cart => "CART",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::GradientBoosting => "Gradient Boosting",
            ModelKind::ConstrainedTree => "New tree",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Legacy(LegacyTable),
    Linear(LinearModel),
    Cart(CartTree),
    RandomForest(RandomForest),
    GradientBoosting(GradientBoosting),
    ConstrainedTree(ConstrainedTree),
}

impl ModelBody {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelBody::Legacy(_) => ModelKind::Legacy,
            ModelBody::Linear(_) => ModelKind::Linear,
            ModelBody::Cart(_) => ModelKind::Cart,
            ModelBody::RandomForest(_) => ModelKind::RandomForest,
            ModelBody::GradientBoosting(_) => ModelKind::GradientBoosting,
            ModelBody::ConstrainedTree(_) => ModelKind::ConstrainedTree,
        }
    }
}

/// A fitted model together with the feature rule it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    pub rule: LowConsumptionRule,
    pub body: ModelBody,
}

#[derive(Serialize)]
struct FileOut<'a, M: Serialize> {
    format_version: u32,
    feature_schema: &'a str,
    kind: ModelKind,
    low_consumption_rule: &'a LowConsumptionRule,
    model: &'a M,
}

#[derive(Deserialize)]
struct FileIn<'a> {
    format_version: u32,
    feature_schema: String,
    kind: ModelKind,
    low_consumption_rule: LowConsumptionRule,
    #[serde(borrow)]
    model: &'a RawValue,
}

impl ForecastModel {
    pub fn kind(&self) -> ModelKind {
        self.body.kind()
    }

    /// Raw model output; linear and boosted models may go below zero.
    pub fn predict_raw(&self, record: &HouseholdRecord) -> f64 {
        if let ModelBody::Legacy(t) = &self.body {
            return t.predict(record).kwh();
        }
        let x = encode(record, &self.rule);
        let row = x.as_slice();
        match &self.body {
            ModelBody::Legacy(_) => unreachable!(),
            ModelBody::Linear(m) => m.predict(row),
            ModelBody::Cart(m) => m.predict(row),
            ModelBody::RandomForest(m) => m.predict(row),
            ModelBody::GradientBoosting(m) => m.predict(row),
            ModelBody::ConstrainedTree(m) if m.monotone_surface => self.surface_envelope(m, record).0,
            ModelBody::ConstrainedTree(m) => m.predict(row),
        }
    }

    /// Smallest tree output over the record's own surface and every larger
    /// surface. Between breakpoints (tree thresholds and rule values on
    /// `surface_m2`) each leaf line rises with surface, so the minimum over
    /// the floats above `s` sits on a breakpoint or the float just over
    /// one. Returns the value and, if it came from a larger surface, that
    /// surface.
    fn surface_envelope(&self, tree: &ConstrainedTree, record: &HouseholdRecord) -> (f64, Option<f64>) {
        let at = |s: f64| {
            let r = HouseholdRecord {
                surface_m2: s,
                ..record.clone()
            };
            tree.predict(encode(&r, &self.rule).as_slice())
        };
        let s = record.surface_m2;
        let mut best = (at(s), None);
        let mut points = tree.surface_thresholds();
        points.extend(self.rule.numeric_breakpoints("surface_m2"));
        let above = points.iter().flat_map(|&b| [b, b.next_up()]);
        let mut candidates: Vec<f64> = above.filter(|&c| c > s && c.is_finite()).collect();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        for c in candidates {
            let v = at(c);
            if v < best.0 {
                best = (v, Some(c));
            }
        }
        best
    }

    /// Prediction floored at 0 kWh.
    pub fn predict(&self, record: &HouseholdRecord) -> AnnualConsumption {
        let p = self.predict_raw(record);
        AnnualConsumption::new(if p > 0.0 { p } else { 0.0 }).expect("models produce finite predictions")
    }

    /// Decision path of a constrained tree; `None` for other kinds.
    pub fn explain(&self, record: &HouseholdRecord) -> Option<(AnnualConsumption, ExplanationTrace)> {
        let ModelBody::ConstrainedTree(tree) = &self.body else {
            return None;
        };
        let x = encode(record, &self.rule);
        let (mut p, mut trace) = tree.predict_explain(x.as_slice(), &HouseholdLabels);
        if tree.monotone_surface {
            if let (v, Some(s)) = self.surface_envelope(tree, record) {
                let held = HouseholdRecord {
                    surface_m2: s,
                    ..record.clone()
                };
                let (_, from) = tree.predict_explain(encode(&held, &self.rule).as_slice(), &HouseholdLabels);
                let hold = SurfaceHold {
                    surface: s,
                    leaf_id: from.leaf_id,
                    alpha: from.alpha,
                    beta: from.beta,
                };
                trace = trace.hold(hold, v);
                p = v;
            }
        }
        Some((
            AnnualConsumption::new(p).expect("leaf coefficients are non-negative"),
            trace,
        ))
    }

    /// Split-gain importance for tree models that record gains.
    pub fn importance(&self) -> Option<FeatureImportance> {
        match &self.body {
            ModelBody::Cart(t) => Some(FeatureImportance::from_trees([t], N_SLOTS)),
            ModelBody::RandomForest(f) => Some(FeatureImportance::from_trees(&f.trees, N_SLOTS)),
            ModelBody::GradientBoosting(g) => Some(FeatureImportance::from_trees(&g.stages, N_SLOTS)),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        fn out<M: Serialize>(rule: &LowConsumptionRule, kind: ModelKind, model: &M) -> Result<String> {
            Ok(serde_json::to_string(&FileOut {
                format_version: MODEL_FORMAT_VERSION,
                feature_schema: FEATURE_SCHEMA,
                kind,
                low_consumption_rule: rule,
                model,
            })?)
        }
        let kind = self.kind();
        match &self.body {
            ModelBody::Legacy(m) => out(&self.rule, kind, m),
            ModelBody::Linear(m) => out(&self.rule, kind, m),
            ModelBody::Cart(m) => out(&self.rule, kind, m),
            ModelBody::RandomForest(m) => out(&self.rule, kind, m),
            ModelBody::GradientBoosting(m) => out(&self.rule, kind, m),
            ModelBody::ConstrainedTree(m) => out(&self.rule, kind, m),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: FileIn = serde_json::from_str(json)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        if file.feature_schema != FEATURE_SCHEMA {
            return Err(Error::ModelFormat(format!(
                "model uses feature schema '{}', this build reads '{FEATURE_SCHEMA}'",
                file.feature_schema
            )));
        }
        let raw = file.model.get();
        let body = match file.kind {
            ModelKind::Legacy => ModelBody::Legacy(serde_json::from_str(raw)?),
            ModelKind::Linear => {
                let m: LinearModel = serde_json::from_str(raw)?;
                check_slots("linear coefficients", m.coefficients.len())?;
                ModelBody::Linear(m)
            }
            ModelKind::Cart => ModelBody::Cart(serde_json::from_str(raw)?),
            ModelKind::RandomForest => {
                let f: RandomForest = serde_json::from_str(raw)?;
                if f.trees.is_empty() {
                    return Err(Error::ModelFormat("random forest without trees".into()));
                }
                ModelBody::RandomForest(f)
            }
            ModelKind::GradientBoosting => ModelBody::GradientBoosting(serde_json::from_str(raw)?),
            ModelKind::ConstrainedTree => ModelBody::ConstrainedTree(serde_json::from_str(raw)?),
        };
        Ok(Self {
            rule: file.low_consumption_rule,
            body,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn check_slots(what: &str, n: usize) -> Result<()> {
    if n == N_SLOTS {
        Ok(())
    } else {
        Err(Error::ModelFormat(format!(
            "{what}: expected {N_SLOTS} entries, got {n}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    pub ridge_epsilon: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            ridge_epsilon: DEFAULT_RIDGE_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegacyConfig {
    pub table: LegacyTable,
}

/// What to train: a kind with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Legacy(LegacyConfig),
    Linear(LinearConfig),
    Cart(CartConfig),
    RandomForest(ForestConfig),
    GradientBoosting(BoostConfig),
    ConstrainedTree(ConstrainedTreeConfig),
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Legacy => ModelSpec::Legacy(LegacyConfig::default()),
            ModelKind::Linear => ModelSpec::Linear(LinearConfig::default()),
            ModelKind::Cart => ModelSpec::Cart(CartConfig::default()),
            ModelKind::RandomForest => ModelSpec::RandomForest(ForestConfig::default()),
            ModelKind::GradientBoosting => ModelSpec::GradientBoosting(BoostConfig::default()),
            ModelKind::ConstrainedTree => ModelSpec::ConstrainedTree(ConstrainedTreeConfig::default()),
        }
    }

    /// Hyperparameters for `kind` from a JSON object of its fields;
    /// missing fields take their defaults.
    pub fn from_json_params(kind: ModelKind, params: serde_json::Value) -> Result<Self> {
        let spec = match kind {
            ModelKind::Legacy => ModelSpec::Legacy(serde_json::from_value(params)?),
            ModelKind::Linear => ModelSpec::Linear(serde_json::from_value(params)?),
            ModelKind::Cart => ModelSpec::Cart(serde_json::from_value(params)?),
            ModelKind::RandomForest => ModelSpec::RandomForest(serde_json::from_value(params)?),
            ModelKind::GradientBoosting => ModelSpec::GradientBoosting(serde_json::from_value(params)?),
            ModelKind::ConstrainedTree => ModelSpec::ConstrainedTree(serde_json::from_value(params)?),
        };
        Ok(spec)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Legacy(_) => ModelKind::Legacy,
            ModelSpec::Linear(_) => ModelKind::Linear,
            ModelSpec::Cart(_) => ModelKind::Cart,
            ModelSpec::RandomForest(_) => ModelKind::RandomForest,
            ModelSpec::GradientBoosting(_) => ModelKind::GradientBoosting,
            ModelSpec::ConstrainedTree(_) => ModelKind::ConstrainedTree,
        }
    }

    /// Overrides the random seed of seeded model kinds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelSpec::RandomForest(c) => c.seed = seed,
            ModelSpec::GradientBoosting(c) => c.seed = seed,
            _ => {}
        }
        self
    }

    pub fn fit(&self, train: &Dataset, rule: &LowConsumptionRule) -> Result<ForecastModel> {
        if let ModelSpec::Legacy(c) = self {
            return Ok(ForecastModel {
                rule: rule.clone(),
                body: ModelBody::Legacy(c.table.clone()),
            });
        }
        if train.is_empty() {
            return Err(Error::Empty("training set is empty"));
        }
        let m = TrainMatrix::from_dataset(train, rule)?;
        self.fit_matrix(&m, rule)
    }

    /// Fits on an already encoded matrix (`rule` is stored with the model).
    pub fn fit_matrix(&self, m: &TrainMatrix, rule: &LowConsumptionRule) -> Result<ForecastModel> {
        if m.n_slots() != N_SLOTS {
            return Err(Error::Config(format!(
                "household models need {N_SLOTS} feature slots, got {}",
                m.n_slots()
            )));
        }
        let body = match self {
            ModelSpec::Legacy(c) => ModelBody::Legacy(c.table.clone()),
            ModelSpec::Linear(c) => ModelBody::Linear(ols_fit(m, c.ridge_epsilon)?),
            ModelSpec::Cart(c) => ModelBody::Cart(cart_fit(m, c)?),
            ModelSpec::RandomForest(c) => ModelBody::RandomForest(rf_fit(m, c)?),
            ModelSpec::GradientBoosting(c) => ModelBody::GradientBoosting(gbm_fit(m, c)?),
            ModelSpec::ConstrainedTree(c) => ModelBody::ConstrainedTree(c.fit(m)?),
        };
        Ok(ForecastModel {
            rule: rule.clone(),
            body,
        })
    }
}

/// Slot names in schema order, for importance tables.
pub fn slot_names() -> Vec<&'static str> {
    Slot::ALL.iter().map(|s| s.name()).collect()
}
