//! Two-regime comparison of the five model families.
//!
//! Regime A ("with outliers") trains on the whole training split; regime B
//! ("filtered") trains on its inliers only. Both are scored on the same
//! unfiltered test split.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constrained::ConstrainedTreeConfig;
use crate::data::{partition_outliers, split_train_test, Dataset, OutlierPolicy};
use crate::error::{Error, Result};
use crate::features::LowConsumptionRule;
use crate::ingest::{ingest_csv, CsvSchema};
use crate::metrics::{
    compute_metrics, distribution_summary, gap_views, DistributionSummary, GapSeries, MetricsReport, PriceConfig,
};
use crate::models::{slot_names, BoostConfig, ForestConfig, LegacyConfig, LinearConfig, ModelKind, ModelSpec};
use crate::synth::{generate, GeneratorConfig};
use crate::tree::TrainMatrix;

/// Report column order.
pub const BENCHMARK_MODELS: [ModelKind; 5] = [
    ModelKind::Legacy,
    ModelKind::GradientBoosting,
    ModelKind::RandomForest,
    ModelKind::Linear,
    ModelKind::ConstrainedTree,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic(GeneratorConfig),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkModels {
    pub legacy: LegacyConfig,
    pub gradient_boosting: BoostConfig,
    pub random_forest: ForestConfig,
    pub linear: LinearConfig,
    pub constrained_tree: ConstrainedTreeConfig,
}

impl BenchmarkModels {
    fn spec(&self, kind: ModelKind) -> ModelSpec {
        match kind {
            ModelKind::Legacy => ModelSpec::Legacy(self.legacy.clone()),
            ModelKind::GradientBoosting => ModelSpec::GradientBoosting(self.gradient_boosting),
            ModelKind::RandomForest => ModelSpec::RandomForest(self.random_forest),
            ModelKind::Linear => ModelSpec::Linear(self.linear),
            ModelKind::ConstrainedTree => ModelSpec::ConstrainedTree(self.constrained_tree.clone()),
            ModelKind::Cart => unreachable!("not part of the benchmark"),
        }
    }
}

/// `seed` drives the train/test split and the forest; a synthetic source
/// keeps the seed in its own generator config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub data: DataSource,
    pub seed: u64,
    pub test_fraction: f64,
    pub outlier_policy: OutlierPolicy,
    pub low_consumption_rule: LowConsumptionRule,
    pub models: BenchmarkModels,
    pub price: PriceConfig,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(GeneratorConfig::default()),
            seed: 0,
            test_fraction: 1.0 / 3.0,
            outlier_policy: OutlierPolicy::default(),
            low_consumption_rule: LowConsumptionRule::default(),
            models: BenchmarkModels::default(),
            price: PriceConfig::default(),
        }
    }
}

impl BenchmarkSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        self.outlier_policy.validate()?;
        PriceConfig::new(self.price.unit_price)?;
        match &self.data {
            DataSource::Csv(p) if !p.exists() => {
                Err(Error::Config(format!("data file {} does not exist", p.display())))
            }
            DataSource::Synthetic(g) => g.validate(),
            DataSource::Csv(_) => Ok(()),
        }
    }

    fn load(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Csv(path) => Ok(ingest_csv(path, &CsvSchema::default())?.dataset),
            DataSource::Synthetic(g) => generate(g),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "a")]
    WithOutliers,
    #[serde(rename = "b")]
    Filtered,
}

impl Regime {
    pub const BOTH: [Regime; 2] = [Regime::WithOutliers, Regime::Filtered];

    pub fn id(self) -> &'static str {
        match self {
            Regime::WithOutliers => "a",
            Regime::Filtered => "b",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::WithOutliers => "with outliers",
            Regime::Filtered => "filtered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummaries {
    pub absolute: DistributionSummary,
    /// Absent when some test target is zero.
    pub relative: Option<DistributionSummary>,
    pub monetary: DistributionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub slot: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: ModelKind,
    pub regime: Regime,
    pub train_size: usize,
    /// On the full test split.
    pub metrics: MetricsReport,
    /// On the test rows inside the outlier policy band.
    pub inlier_metrics: MetricsReport,
    /// RMSD change of this model's regime B against its regime A, in %;
    /// 0 on regime A rows.
    pub rmsd_delta_pct: f64,
    pub gaps: GapSummaries,
    /// Descending, for models that record split gains.
    pub importance: Option<Vec<ImportanceEntry>>,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub spec: BenchmarkSpec,
    pub n_total: usize,
    pub n_train: usize,
    pub n_train_inliers: usize,
    pub n_test: usize,
    pub n_test_inliers: usize,
    pub test_targets: Vec<f64>,
    pub results: Vec<ModelResult>,
}

impl BenchmarkReport {
    pub fn result(&self, model: ModelKind, regime: Regime) -> Option<&ModelResult> {
        self.results.iter().find(|r| r.model == model && r.regime == regime)
    }
}

struct Fitted {
    model: ModelKind,
    regime: Regime,
    train_size: usize,
    predictions: Vec<f64>,
    importance: Option<Vec<ImportanceEntry>>,
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    spec.validate()?;
    let all = spec.load()?;
    let (train, test) = split_train_test(&all, spec.test_fraction, spec.seed)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty("train/test split left an empty side"));
    }
    let (train_inliers, _) = partition_outliers(&train, &spec.outlier_policy);
    if train_inliers.is_empty() {
        return Err(Error::Empty("no training inliers left after outlier filtering"));
    }
    let rule = &spec.low_consumption_rule;
    let matrices = [
        TrainMatrix::from_dataset(&train, rule)?,
        TrainMatrix::from_dataset(&train_inliers, rule)?,
    ];

    let jobs: Vec<(ModelKind, Regime)> = BENCHMARK_MODELS
        .iter()
        .flat_map(|&m| Regime::BOTH.map(|r| (m, r)))
        .collect();
    let fitted = jobs
        .par_iter()
        .map(|&(kind, regime)| -> Result<Fitted> {
            let (matrix, size) = match regime {
                Regime::WithOutliers => (&matrices[0], train.len()),
                Regime::Filtered => (&matrices[1], train_inliers.len()),
            };
            let model = spec.models.spec(kind).with_seed(spec.seed).fit_matrix(matrix, rule)?;
            let names = slot_names();
            let importance = model.importance().map(|imp| {
                imp.ranked()
                    .into_iter()
                    .map(|(slot, weight)| ImportanceEntry {
                        slot: names[slot].to_string(),
                        weight,
                    })
                    .collect()
            });
            Ok(Fitted {
                model: kind,
                regime,
                train_size: size,
                predictions: test.iter().map(|e| model.predict(&e.record).kwh()).collect(),
                importance,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let targets = test.targets();
    let inlier_rows: Vec<usize> = (0..targets.len())
        .filter(|&i| spec.outlier_policy.is_inlier(targets[i]))
        .collect();
    if inlier_rows.is_empty() {
        return Err(Error::Empty("test split has no inliers"));
    }
    let inlier_targets: Vec<f64> = inlier_rows.iter().map(|&i| targets[i]).collect();

    let mut results = Vec::with_capacity(fitted.len());
    for f in fitted {
        let gaps = GapSeries::from_predictions(&targets, &f.predictions)?;
        let metrics = compute_metrics(&gaps)?;
        let inlier_preds: Vec<f64> = inlier_rows.iter().map(|&i| f.predictions[i]).collect();
        let inlier_metrics = compute_metrics(&GapSeries::from_predictions(&inlier_targets, &inlier_preds)?)?;
        let summaries = match gap_views(&targets, &f.predictions, &spec.price) {
            Ok(v) => GapSummaries {
                absolute: distribution_summary(v.absolute.as_slice())?,
                relative: Some(distribution_summary(&v.relative)?),
                monetary: distribution_summary(&v.monetary)?,
            },
            Err(Error::ZeroTarget(_)) => GapSummaries {
                absolute: distribution_summary(gaps.as_slice())?,
                relative: None,
                monetary: distribution_summary(&crate::metrics::monetary_gaps(&gaps, &spec.price))?,
            },
            Err(e) => return Err(e),
        };
        results.push(ModelResult {
            model: f.model,
            regime: f.regime,
            train_size: f.train_size,
            metrics,
            inlier_metrics,
            rmsd_delta_pct: 0.0,
            gaps: summaries,
            importance: f.importance,
            predictions: f.predictions,
        });
    }
    for kind in BENCHMARK_MODELS {
        let base = results
            .iter()
            .find(|r| r.model == kind && r.regime == Regime::WithOutliers)
            .map(|r| r.metrics.rmsd)
            .expect("every model has a regime A row");
        if let Some(r) = results
            .iter_mut()
            .find(|r| r.model == kind && r.regime == Regime::Filtered)
        {
            r.rmsd_delta_pct = if base > 0.0 {
                crate::metrics::rmsd_delta(r.metrics.rmsd, base)?
            } else {
                0.0
            };
        }
    }

    Ok(BenchmarkReport {
        spec: spec.clone(),
        n_total: all.len(),
        n_train: train.len(),
        n_train_inliers: train_inliers.len(),
        n_test: test.len(),
        n_test_inliers: inlier_rows.len(),
        test_targets: targets,
        results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_string(rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Metrics table for one regime: one row per metric, one column per model.
pub fn metrics_table(report: &BenchmarkReport, regime: Regime) -> Result<String> {
    let mut header = vec!["metric".to_string()];
    header.extend(BENCHMARK_MODELS.iter().map(|m| m.display_name().to_string()));
    let pick = |f: &dyn Fn(&ModelResult) -> f64| -> Vec<String> {
        BENCHMARK_MODELS
            .iter()
            .map(|&m| report.result(m, regime).map_or(String::new(), |r| f(r).to_string()))
            .collect()
    };
    let row = |name: &str, f: &dyn Fn(&ModelResult) -> f64| -> Vec<String> {
        let mut r = vec![name.to_string()];
        r.extend(pick(f));
        r
    };
    csv_string(&[
        header,
        row("MSD", &|r| r.metrics.msd),
        row("RMSD", &|r| r.metrics.rmsd),
        row("MAD", &|r| r.metrics.mad),
        row("MAE", &|r| r.metrics.mae),
        row("RMSD difference", &|r| r.rmsd_delta_pct),
    ])
}

fn gaps_table(report: &BenchmarkReport, result: &ModelResult, price: &PriceConfig) -> Result<String> {
    let mut rows = vec![vec![
        "row".into(),
        "target_kwh".into(),
        "prediction_kwh".into(),
        "gap_kwh".into(),
        "gap_relative".into(),
        "gap_eur".into(),
    ]];
    for (i, (t, p)) in report.test_targets.iter().zip(&result.predictions).enumerate() {
        let gap = p - t;
        let relative = if *t == 0.0 {
            String::new()
        } else {
            (gap / t).to_string()
        };
        rows.push(vec![
            i.to_string(),
            t.to_string(),
            p.to_string(),
            gap.to_string(),
            relative,
            (gap * price.unit_price).to_string(),
        ]);
    }
    csv_string(&rows)
}

/// Writes the report bundle into directory `path`: `report.json`, or the
/// CSV tables `metrics_regime_{a,b}.csv`, `gaps_{model}_{regime}.csv` and
/// `importance_{model}.csv` (regime A fits).
pub fn emit_report(report: &BenchmarkReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = path.as_ref();
    if dir.as_os_str().is_empty() {
        return Err(Error::Config("report path is empty".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<()> {
        let p = dir.join(name);
        write_file(&p, contents)?;
        written.push(p);
        Ok(())
    };
    match format {
        ReportFormat::Json => put("report.json".into(), serde_json::to_string_pretty(report)?)?,
        ReportFormat::Csv => {
            for regime in Regime::BOTH {
                put(
                    format!("metrics_regime_{}.csv", regime.id()),
                    metrics_table(report, regime)?,
                )?;
            }
            for r in &report.results {
                put(
                    format!("gaps_{}_{}.csv", r.model.id(), r.regime.id()),
                    gaps_table(report, r, &report.spec.price)?,
                )?;
                if let (Regime::WithOutliers, Some(imp)) = (r.regime, &r.importance) {
                    let mut rows = vec![vec!["slot_name".to_string(), "weight".to_string()]];
                    rows.extend(imp.iter().map(|e| vec![e.slot.clone(), e.weight.to_string()]));
                    put(format!("importance_{}.csv", r.model.id()), csv_string(&rows)?)?;
                }
            }
        }
    }
    Ok(written)
}
