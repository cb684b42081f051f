//! Checks that predictions move in the expected direction when one input
//! changes and the rest of the household stays fixed.

use serde::{Deserialize, Serialize};

use crate::data::{HouseholdRecord, MAX_POWER_KVA};
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE_KWH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditedFeature {
    Occupants,
    SurfaceM2,
    MaxPowerKva,
}

impl AuditedFeature {
    pub fn name(self) -> &'static str {
        match self {
            AuditedFeature::Occupants => "occupants",
            AuditedFeature::SurfaceM2 => "surface_m2",
            AuditedFeature::MaxPowerKva => "max_power_kva",
        }
    }

    fn apply(self, record: &HouseholdRecord, value: f64) -> HouseholdRecord {
        let mut r = record.clone();
        match self {
            AuditedFeature::Occupants => r.occupants = value as u32,
            AuditedFeature::SurfaceM2 => r.surface_m2 = value,
            AuditedFeature::MaxPowerKva => r.max_power_kva = value as u32,
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Values to step through for one feature, in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub feature: AuditedFeature,
    pub direction: Direction,
    pub values: Vec<f64>,
}

impl Ladder {
    /// Occupants, surface and meter power, all expected to raise consumption.
    pub fn defaults() -> Vec<Ladder> {
        vec![
            Ladder {
                feature: AuditedFeature::Occupants,
                direction: Direction::Increasing,
                values: (1..=6).map(f64::from).collect(),
            },
            Ladder {
                feature: AuditedFeature::SurfaceM2,
                direction: Direction::Increasing,
                values: (2..=30).map(|k| f64::from(k) * 10.0).collect(),
            },
            Ladder {
                feature: AuditedFeature::MaxPowerKva,
                direction: Direction::Increasing,
                values: MAX_POWER_KVA.iter().map(|&p| f64::from(p)).collect(),
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub bases: Vec<HouseholdRecord>,
    pub ladders: Vec<Ladder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub feature: AuditedFeature,
    pub base_index: usize,
    pub from_value: f64,
    pub to_value: f64,
    pub from_prediction: f64,
    pub to_prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAudit {
    pub feature: AuditedFeature,
    pub direction: Direction,
    pub pairs_checked: usize,
    pub violations: usize,
}

impl FeatureAudit {
    pub fn violation_rate(&self) -> f64 {
        if self.pairs_checked == 0 {
            0.0
        } else {
            self.violations as f64 / self.pairs_checked as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// e.g. `1000 base records × {occupants: 6, surface_m2: 29} values`
    pub probe: String,
    pub tolerance_kwh: f64,
    pub features: Vec<FeatureAudit>,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
}

impl MonotonicityReport {
    pub fn feature(&self, feature: AuditedFeature) -> Option<&FeatureAudit> {
        self.features.iter().find(|f| f.feature == feature)
    }
}

/// Walks every ladder from every base record and records adjacent pairs
/// whose prediction moves against the expected direction by more than
/// `tolerance_kwh`.
pub fn audit_monotonicity(
    predict: impl Fn(&HouseholdRecord) -> f64,
    grid: &ProbeGrid,
    tolerance_kwh: f64,
) -> Result<MonotonicityReport> {
    if grid.bases.is_empty() || grid.ladders.iter().all(|l| l.values.len() < 2) {
        return Err(Error::Empty("probe grid has no base records or no ladder pairs"));
    }
    let mut features = Vec::new();
    let mut violations = Vec::new();
    for ladder in &grid.ladders {
        let mut audit = FeatureAudit {
            feature: ladder.feature,
            direction: ladder.direction,
            pairs_checked: 0,
            violations: 0,
        };
        for (base_index, base) in grid.bases.iter().enumerate() {
            let preds: Vec<f64> = ladder
                .values
                .iter()
                .map(|&v| predict(&ladder.feature.apply(base, v)))
                .collect();
            for (k, w) in preds.windows(2).enumerate() {
                audit.pairs_checked += 1;
                let drop = match ladder.direction {
                    Direction::Increasing => w[0] - w[1],
                    Direction::Decreasing => w[1] - w[0],
                };
                if drop > tolerance_kwh {
                    audit.violations += 1;
                    violations.push(Violation {
                        feature: ladder.feature,
                        base_index,
                        from_value: ladder.values[k],
                        to_value: ladder.values[k + 1],
                        from_prediction: w[0],
                        to_prediction: w[1],
                    });
                }
            }
        }
        features.push(audit);
    }
    let described: Vec<String> = grid
        .ladders
        .iter()
        .map(|l| format!("{}: {}", l.feature.name(), l.values.len()))
        .collect();
    Ok(MonotonicityReport {
        probe: format!(
            "{} base records × {{{}}} values",
            grid.bases.len(),
            described.join(", ")
        ),
        tolerance_kwh,
        violation_count: violations.len(),
        features,
        violations,
    })
}
