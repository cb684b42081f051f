//! The lookup-table estimator that predates the learned models.

use serde::{Deserialize, Serialize};

use crate::data::{AnnualConsumption, HeatingType, HouseholdRecord};
use crate::error::{Error, Result};

/// Half-open interval `(above, up_to]`; `up_to = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub above: f64,
    pub up_to: Option<f64>,
}

impl Band {
    pub fn contains(&self, v: f64) -> bool {
        v > self.above && self.up_to.is_none_or(|u| v <= u)
    }

    fn edges(&self) -> impl Iterator<Item = f64> {
        std::iter::once(self.above).chain(self.up_to)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegacyEntry {
    pub heating_types: Vec<HeatingType>,
    pub occupants: Band,
    pub surface_m2: Band,
    pub car_kwh: f64,
}

impl LegacyEntry {
    fn matches(&self, heating: HeatingType, occupants: f64, surface: f64) -> bool {
        self.heating_types.contains(&heating) && self.occupants.contains(occupants) && self.surface_m2.contains(surface)
    }
}

/// Band table; serializes as a JSON array of entries. Construction checks
/// that every valid record falls in exactly one entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LegacyEntry>", into = "Vec<LegacyEntry>")]
pub struct LegacyTable {
    entries: Vec<LegacyEntry>,
}

impl TryFrom<Vec<LegacyEntry>> for LegacyTable {
    type Error = Error;

    fn try_from(entries: Vec<LegacyEntry>) -> Result<Self> {
        LegacyTable::new(entries)
    }
}

impl From<LegacyTable> for Vec<LegacyEntry> {
    fn from(t: LegacyTable) -> Self {
        t.entries
    }
}

/// Points on and between every edge, plus one past the last.
fn probes(mut edges: Vec<f64>, floor: f64) -> Vec<f64> {
    edges.retain(|e| e.is_finite() && *e >= floor);
    edges.push(floor);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let mut out = Vec::new();
    for w in edges.windows(2) {
        out.push(w[1]);
        out.push((w[0] + w[1]) / 2.0);
    }
    out.push(edges[edges.len() - 1] + 1.0);
    out.retain(|&p| p >= floor);
    out
}

impl LegacyTable {
    pub fn new(entries: Vec<LegacyEntry>) -> Result<Self> {
        for e in &entries {
            if !(e.car_kwh.is_finite() && e.car_kwh >= 0.0) {
                return Err(Error::Config(format!(
                    "legacy entry value {} is not a valid consumption",
                    e.car_kwh
                )));
            }
        }
        let table = Self { entries };
        table.check_partition()?;
        Ok(table)
    }

    pub fn entries(&self) -> &[LegacyEntry] {
        &self.entries
    }

    fn check_partition(&self) -> Result<()> {
        let occupant_edges: Vec<f64> = self.entries.iter().flat_map(|e| e.occupants.edges()).collect();
        let surface_edges: Vec<f64> = self.entries.iter().flat_map(|e| e.surface_m2.edges()).collect();
        let mut occupants: Vec<f64> = probes(occupant_edges, 1.0).into_iter().map(f64::ceil).collect();
        occupants.dedup();
        let surfaces = probes(surface_edges, 0.0)
            .into_iter()
            .filter(|&s| s > 0.0)
            .chain([0.5])
            .collect::<Vec<_>>();
        for &h in HeatingType::ALL {
            for &o in &occupants {
                for &s in &surfaces {
                    let hits = self.entries.iter().filter(|e| e.matches(h, o, s)).count();
                    if hits != 1 {
                        return Err(Error::Config(format!(
                            "legacy bands are not a partition: ({h}, {o} occupants, {s} m²) matches {hits} entries"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn predict(&self, record: &HouseholdRecord) -> AnnualConsumption {
        let occupants = f64::from(record.occupants);
        let entry = self
            .entries
            .iter()
            .find(|e| e.matches(record.heating_type, occupants, record.surface_m2))
            .expect("legacy bands cover every valid record");
        AnnualConsumption::new(entry.car_kwh).expect("validated at construction")
    }
}

impl Default for LegacyTable {
    /// Coarse heating-type × occupants × surface grid, set on the high
    /// side of typical consumption.
    fn default() -> Self {
        use HeatingType::*;
        let rows: [(&[HeatingType], [f64; 6]); 3] = [
            (&[Electric], [6200.0, 9600.0, 14400.0, 7800.0, 12000.0, 17400.0]),
            (&[HeatPump], [3600.0, 5000.0, 7200.0, 5000.0, 6700.0, 9000.0]),
            (
                &[District, Fuel, Gas, Other],
                [3100.0, 3800.0, 4800.0, 4800.0, 5800.0, 7200.0],
            ),
        ];
        let occupant_bands = [
            Band {
                above: 0.0,
                up_to: Some(2.0),
            },
            Band {
                above: 2.0,
                up_to: None,
            },
        ];
        let surface_bands = [
            Band {
                above: 0.0,
                up_to: Some(60.0),
            },
            Band {
                above: 60.0,
                up_to: Some(120.0),
            },
            Band {
                above: 120.0,
                up_to: None,
            },
        ];
        let mut entries = Vec::new();
        for (heating, values) in rows {
            for (oi, occupants) in occupant_bands.iter().enumerate() {
                for (si, surface) in surface_bands.iter().enumerate() {
                    entries.push(LegacyEntry {
                        heating_types: heating.to_vec(),
                        occupants: *occupants,
                        surface_m2: *surface,
                        car_kwh: values[oi * 3 + si],
                    });
                }
            }
        }
        Self::new(entries).expect("default legacy table is a partition")
    }
}
