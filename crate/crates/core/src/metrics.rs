//! Error metrics over gap series (`prediction - target`, in kWh).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regulated French base tariff, €/kWh, as of February 2024.
pub const DEFAULT_UNIT_PRICE: f64 = 0.2516;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GapSeries(Vec<f64>);

impl GapSeries {
    pub fn new(gaps: Vec<f64>) -> Result<Self> {
        if let Some(i) = gaps.iter().position(|g| !g.is_finite()) {
            return Err(Error::Config(format!("gap {i} is not finite")));
        }
        Ok(Self(gaps))
    }

    /// `prediction_i - target_i`; positive means overestimation.
    pub fn from_predictions(targets: &[f64], predictions: &[f64]) -> Result<Self> {
        check_lengths(targets, predictions)?;
        Self::new(predictions.iter().zip(targets).map(|(p, t)| p - t).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_lengths(targets: &[f64], predictions: &[f64]) -> Result<()> {
    if targets.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: targets.len(),
            right: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::Empty("gap series needs at least one pair"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub msd: f64,
    pub rmsd: f64,
    pub mad: f64,
    pub mae: f64,
}

pub fn compute_metrics(gaps: &GapSeries) -> Result<MetricsReport> {
    let g = gaps.as_slice();
    if g.is_empty() {
        return Err(Error::Empty("metrics need at least one gap"));
    }
    let n = g.len() as f64;
    let msd = g.iter().map(|x| x * x).sum::<f64>() / n;
    let mae = g.iter().map(|x| x.abs()).sum::<f64>() / n;
    let center = median(g);
    let deviations: Vec<f64> = g.iter().map(|x| (x - center).abs()).collect();
    Ok(MetricsReport {
        n: g.len(),
        msd,
        rmsd: msd.sqrt(),
        mad: median(&deviations),
        mae,
    })
}

/// Median with the mean of the two central order statistics for even n.
/// Panics on empty input.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

/// Linear interpolation between order statistics at position `(n-1)p`.
/// At `p = 0.5` this is the median rule above.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else if (h - lo as f64 - 0.5).abs() < 1e-12 {
        (sorted[lo] + sorted[hi]) / 2.0
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Percentage change of the filtered-regime RMSD against the baseline.
pub fn rmsd_delta(rmsd_filtered: f64, rmsd_baseline: f64) -> Result<f64> {
    if rmsd_baseline <= 0.0 || !rmsd_baseline.is_finite() {
        return Err(Error::Config(format!(
            "baseline RMSD must be positive, got {rmsd_baseline}"
        )));
    }
    Ok(100.0 * (rmsd_filtered - rmsd_baseline) / rmsd_baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceConfig {
    /// €/kWh
    pub unit_price: f64,
}

impl Default for PriceConfig {
    fn default() -> Self {
        Self {
            unit_price: DEFAULT_UNIT_PRICE,
        }
    }
}

impl PriceConfig {
    pub fn new(unit_price: f64) -> Result<Self> {
        if unit_price.is_finite() && unit_price > 0.0 {
            Ok(Self { unit_price })
        } else {
            Err(Error::Config(format!("unit price must be positive, got {unit_price}")))
        }
    }

    /// Yearly cost spread evenly over twelve payments, rounded half-up to
    /// the cent.
    pub fn monthly_installment(&self, car_kwh: f64) -> f64 {
        round_cents(car_kwh * self.unit_price / 12.0)
    }
}

pub fn round_cents(eur: f64) -> f64 {
    // half-up; the nudge absorbs representation error on half-cent values
    let scaled = eur * 100.0;
    (scaled + scaled.abs() * 1e-12).round() / 100.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapViews {
    pub absolute: GapSeries,
    /// Gap divided by target.
    pub relative: Vec<f64>,
    /// Gap times unit price, in €.
    pub monetary: Vec<f64>,
}

pub fn gap_views(targets: &[f64], predictions: &[f64], price: &PriceConfig) -> Result<GapViews> {
    let absolute = GapSeries::from_predictions(targets, predictions)?;
    if let Some(i) = targets.iter().position(|&t| t == 0.0) {
        return Err(Error::ZeroTarget(i));
    }
    let relative = absolute.as_slice().iter().zip(targets).map(|(g, t)| g / t).collect();
    let monetary = monetary_gaps(&absolute, price);
    Ok(GapViews {
        absolute,
        relative,
        monetary,
    })
}

pub fn monetary_gaps(gaps: &GapSeries, price: &PriceConfig) -> Vec<f64> {
    gaps.as_slice().iter().map(|g| g * price.unit_price).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// 10th through 90th percentiles.
    pub deciles: [f64; 9],
}

pub fn distribution_summary(values: &[f64]) -> Result<DistributionSummary> {
    if values.is_empty() {
        return Err(Error::Empty("distribution summary needs at least one value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut deciles = [0.0; 9];
    for (k, d) in deciles.iter_mut().enumerate() {
        *d = quantile_sorted(&sorted, (k + 1) as f64 / 10.0);
    }
    Ok(DistributionSummary {
        n: sorted.len(),
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        deciles,
    })
}
