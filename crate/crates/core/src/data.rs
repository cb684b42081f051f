//! Household records, the annual consumption target, and dataset-level
//! operations (annualization, outlier partitioning, train/test splitting).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const SCHEMA_VERSION: &str = "hearthcast.household.v1";

/// Shortest meter window accepted as a proxy for a full year.
pub const MIN_READING_DAYS: u32 = 70;

/// Meter capacities (kVA) offered on the market.
pub const MAX_POWER_KVA: [u32; 9] = [3, 6, 9, 12, 15, 18, 24, 30, 36];

/// Closed category sets. Variants are declared alphabetically, and the
/// declaration index is the feature code.
macro_rules! category {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const FIELD: &'static str = $field;

            pub fn label(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }

            pub fn code(self) -> u32 {
                self as u32
            }

            pub fn from_code(code: u32) -> Option<Self> {
                Self::ALL.get(code as usize).copied()
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($label => Ok($name::$variant),)+
                    other => Err(Error::InvalidRecord(format!(
                        "unknown category '{other}' for {}", $field
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

category!(HeatingType, "heating_type" {
    District => "district",
    Electric => "electric",
    Fuel => "fuel",
    Gas => "gas",
    HeatPump => "heat_pump",
    Other => "other",
});

category!(WaterHeatingType, "water_heating_type" {
    Electric => "electric",
    Gas => "gas",
    Other => "other",
    Thermodynamic => "thermodynamic",
});

category!(CookingType, "cooking_type" {
    Electric => "electric",
    Gas => "gas",
    Mixed => "mixed",
});

category!(HouseType, "house_type" {
    Apartment => "apartment",
    House => "house",
});

category!(
    /// Base tariff or peak/off-peak split.
    TariffIndex, "tariff_index" {
    Base => "base",
    PeakOffpeak => "peak_offpeak",
});

/// What is known about a dwelling at subscription time.
///
/// Field names match the CSV columns and the HTTP API bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdRecord {
    pub surface_m2: f64,
    pub heating_type: HeatingType,
    pub water_heating_type: WaterHeatingType,
    pub cooking_type: CookingType,
    pub occupants: u32,
    pub house_type: HouseType,
    pub tariff_index: TariffIndex,
    pub max_power_kva: u32,
    #[serde(default)]
    pub reading_days: u32,
}

impl HouseholdRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.surface_m2.is_finite() && self.surface_m2 > 0.0) {
            return Err(Error::InvalidRecord(format!(
                "surface_m2 must be a positive number, got {}",
                self.surface_m2
            )));
        }
        if self.occupants < 1 {
            return Err(Error::InvalidRecord("occupants must be at least 1".into()));
        }
        if !MAX_POWER_KVA.contains(&self.max_power_kva) {
            return Err(Error::InvalidRecord(format!(
                "max_power_kva {} is not one of {:?}",
                self.max_power_kva, MAX_POWER_KVA
            )));
        }
        Ok(())
    }
}

/// Yearly reference consumption (CAR) in kWh.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnnualConsumption(f64);

impl AnnualConsumption {
    pub fn new(kwh: f64) -> Result<Self> {
        if kwh.is_finite() && kwh >= 0.0 {
            Ok(Self(kwh))
        } else {
            Err(Error::InvalidRecord(format!(
                "annual consumption must be finite and non-negative, got {kwh}"
            )))
        }
    }

    pub fn kwh(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub record: HouseholdRecord,
    pub target: AnnualConsumption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub schema_version: String,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>) -> Self {
        Self {
            examples,
            schema_version: SCHEMA_VERSION.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledExample> {
        self.examples.iter()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.examples.iter().map(|e| e.target.kwh()).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &HouseholdRecord> {
        self.examples.iter().map(|e| &e.record)
    }

    fn with_examples(&self, examples: Vec<LabeledExample>) -> Self {
        Self {
            examples,
            schema_version: self.schema_version.clone(),
        }
    }
}

/// Scale consumption observed over `reading_days` to a 365-day year.
pub fn annualize_car(observed_kwh: f64, reading_days: u32) -> Result<AnnualConsumption> {
    if reading_days < MIN_READING_DAYS {
        return Err(Error::InsufficientWindow {
            days: reading_days,
            min: MIN_READING_DAYS,
        });
    }
    AnnualConsumption::new(observed_kwh * 365.0 / f64::from(reading_days))
}

/// Targets outside `[low_bound, high_bound]` are outliers. Both bounds
/// count as inliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierPolicy {
    pub low_bound: f64,
    pub high_bound: f64,
}

impl Default for OutlierPolicy {
    fn default() -> Self {
        Self {
            low_bound: 1000.0,
            high_bound: 10_000.0,
        }
    }
}

impl OutlierPolicy {
    pub fn new(low_bound: f64, high_bound: f64) -> Result<Self> {
        let policy = Self { low_bound, high_bound };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.low_bound >= 0.0 && self.low_bound < self.high_bound {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "outlier bounds need 0 <= low < high, got [{}, {}]",
                self.low_bound, self.high_bound
            )))
        }
    }

    pub fn is_inlier(&self, kwh: f64) -> bool {
        self.low_bound <= kwh && kwh <= self.high_bound
    }
}

/// Returns `(inliers, outliers)`, each in input order.
pub fn partition_outliers(ds: &Dataset, policy: &OutlierPolicy) -> (Dataset, Dataset) {
    let (inliers, outliers): (Vec<_>, Vec<_>) = ds
        .examples
        .iter()
        .cloned()
        .partition(|e| policy.is_inlier(e.target.kwh()));
    (ds.with_examples(inliers), ds.with_examples(outliers))
}

/// Seeded train/test split.
///
/// Every example gets a rank from `SplitMix64::new(seed).permutation(n)`.
/// For `test_fraction <= 0.5` the test set is the `round(n * f)` lowest
/// ranks; above 0.5 it is the complement of the split for `1 - f`, so `f`
/// and `1 - f` produce complementary sets. Both outputs keep input order.
pub fn split_train_test(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if ds.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset"));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mask = test_mask(ds.len(), test_fraction, seed);
    let mut train = Vec::with_capacity(ds.len());
    let mut test = Vec::new();
    for (example, is_test) in ds.examples.iter().zip(mask) {
        if is_test {
            test.push(example.clone());
        } else {
            train.push(example.clone());
        }
    }
    Ok((ds.with_examples(train), ds.with_examples(test)))
}

fn test_mask(n: usize, test_fraction: f64, seed: u64) -> Vec<bool> {
    let order = SplitMix64::new(seed).permutation(n);
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    if test_fraction <= 0.5 {
        let k = (n as f64 * test_fraction).round() as usize;
        rank.iter().map(|&r| r < k).collect()
    } else {
        let k = (n as f64 * (1.0 - test_fraction)).round() as usize;
        rank.iter().map(|&r| r >= k).collect()
    }
}
