//! Dense numeric encoding of household records.
//!
//! Slot order is fixed by [`Slot::ALL`]. Categorical fields are encoded as
//! their alphabetical code within the closed set; the derived
//! `low_consumption` slot is 0 or 1. The meter window (`reading_days`) is
//! provenance of the target rather than a dwelling attribute and is not
//! encoded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{CookingType, HeatingType, HouseType, HouseholdRecord, TariffIndex, WaterHeatingType};
use crate::error::{Error, Result};

pub const FEATURE_SCHEMA: &str = "hearthcast.features.v1";
pub const N_SLOTS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Surface,
    HeatingType,
    WaterHeatingType,
    CookingType,
    Occupants,
    HouseType,
    TariffIndex,
    MaxPower,
    LowConsumption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SlotKind {
    Numeric,
    Categorical { cardinality: u32 },
}

impl SlotKind {
    pub fn is_categorical(self) -> bool {
        matches!(self, SlotKind::Categorical { .. })
    }
}

impl Slot {
    pub const ALL: [Slot; N_SLOTS] = [
        Slot::Surface,
        Slot::HeatingType,
        Slot::WaterHeatingType,
        Slot::CookingType,
        Slot::Occupants,
        Slot::HouseType,
        Slot::TariffIndex,
        Slot::MaxPower,
        Slot::LowConsumption,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Slot> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Slot::Surface => "surface",
            Slot::HeatingType => "heating_type",
            Slot::WaterHeatingType => "water_heating_type",
            Slot::CookingType => "cooking_type",
            Slot::Occupants => "occupants",
            Slot::HouseType => "house_type",
            Slot::TariffIndex => "tariff_index",
            Slot::MaxPower => "max_power",
            Slot::LowConsumption => "low_consumption",
        }
    }

    pub fn kind(self) -> SlotKind {
        let cardinality = match self {
            Slot::HeatingType => HeatingType::ALL.len(),
            Slot::WaterHeatingType => WaterHeatingType::ALL.len(),
            Slot::CookingType => CookingType::ALL.len(),
            Slot::HouseType => HouseType::ALL.len(),
            Slot::TariffIndex => TariffIndex::ALL.len(),
            _ => return SlotKind::Numeric,
        };
        SlotKind::Categorical {
            cardinality: cardinality as u32,
        }
    }

    /// Human label of a categorical code, if this slot is categorical.
    pub fn category_label(self, code: u32) -> Option<&'static str> {
        match self {
            Slot::HeatingType => HeatingType::from_code(code).map(HeatingType::label),
            Slot::WaterHeatingType => WaterHeatingType::from_code(code).map(WaterHeatingType::label),
            Slot::CookingType => CookingType::from_code(code).map(CookingType::label),
            Slot::HouseType => HouseType::from_code(code).map(HouseType::label),
            Slot::TariffIndex => TariffIndex::from_code(code).map(TariffIndex::label),
            _ => None,
        }
    }

    fn category_labels(self) -> Vec<&'static str> {
        match self {
            Slot::HeatingType => HeatingType::ALL.iter().map(|c| c.label()).collect(),
            Slot::WaterHeatingType => WaterHeatingType::ALL.iter().map(|c| c.label()).collect(),
            Slot::CookingType => CookingType::ALL.iter().map(|c| c.label()).collect(),
            Slot::HouseType => HouseType::ALL.iter().map(|c| c.label()).collect(),
            Slot::TariffIndex => TariffIndex::ALL.iter().map(|c| c.label()).collect(),
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Slot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Slot::ALL
            .iter()
            .copied()
            .find(|slot| slot.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown feature slot '{s}'")))
    }
}

pub fn slot_kinds() -> Vec<SlotKind> {
    Slot::ALL.iter().map(|s| s.kind()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; N_SLOTS]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, slot: Slot) -> f64 {
        self.0[slot.index()]
    }
}

pub fn encode(record: &HouseholdRecord, rule: &LowConsumptionRule) -> FeatureVector {
    let mut v = [0.0; N_SLOTS];
    v[Slot::Surface.index()] = record.surface_m2;
    v[Slot::HeatingType.index()] = f64::from(record.heating_type.code());
    v[Slot::WaterHeatingType.index()] = f64::from(record.water_heating_type.code());
    v[Slot::CookingType.index()] = f64::from(record.cooking_type.code());
    v[Slot::Occupants.index()] = f64::from(record.occupants);
    v[Slot::HouseType.index()] = f64::from(record.house_type.code());
    v[Slot::TariffIndex.index()] = f64::from(record.tariff_index.code());
    v[Slot::MaxPower.index()] = f64::from(record.max_power_kva);
    v[Slot::LowConsumption.index()] = if rule.evaluate(record) { 1.0 } else { 0.0 };
    FeatureVector(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClauseValue {
    Number(f64),
    Text(String),
}

/// One `(field, comparator, value)` test. Field names are the record's
/// field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub field: String,
    pub op: Comparator,
    pub value: ClauseValue,
}

enum FieldValue {
    Number(f64),
    Text(&'static str),
}

fn field_value(record: &HouseholdRecord, field: &str) -> Option<FieldValue> {
    use FieldValue::{Number, Text};
    Some(match field {
        "surface_m2" => Number(record.surface_m2),
        "occupants" => Number(f64::from(record.occupants)),
        "max_power_kva" => Number(f64::from(record.max_power_kva)),
        "reading_days" => Number(f64::from(record.reading_days)),
        "heating_type" => Text(record.heating_type.label()),
        "water_heating_type" => Text(record.water_heating_type.label()),
        "cooking_type" => Text(record.cooking_type.label()),
        "house_type" => Text(record.house_type.label()),
        "tariff_index" => Text(record.tariff_index.label()),
        _ => return None,
    })
}

fn category_set(field: &str) -> Option<Vec<&'static str>> {
    let slot = match field {
        "heating_type" => Slot::HeatingType,
        "water_heating_type" => Slot::WaterHeatingType,
        "cooking_type" => Slot::CookingType,
        "house_type" => Slot::HouseType,
        "tariff_index" => Slot::TariffIndex,
        _ => return None,
    };
    Some(slot.category_labels())
}

impl Clause {
    fn validate(&self) -> Result<()> {
        let numeric = matches!(
            self.field.as_str(),
            "surface_m2" | "occupants" | "max_power_kva" | "reading_days"
        );
        match (&self.value, numeric, category_set(&self.field)) {
            (ClauseValue::Number(x), true, _) if x.is_finite() => Ok(()),
            (ClauseValue::Text(t), false, Some(set)) => {
                if !matches!(self.op, Comparator::Eq | Comparator::Ne) {
                    Err(Error::Config(format!(
                        "categorical field {} only supports eq/ne",
                        self.field
                    )))
                } else if !set.contains(&t.as_str()) {
                    Err(Error::Config(format!("unknown category '{t}' for {}", self.field)))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::Config(format!(
                "clause on '{}' has an unknown field or a mismatched value type",
                self.field
            ))),
        }
    }

    fn evaluate(&self, record: &HouseholdRecord) -> bool {
        match (field_value(record, &self.field), &self.value) {
            (Some(FieldValue::Number(x)), ClauseValue::Number(v)) => self.op.holds(x, *v),
            (Some(FieldValue::Text(x)), ClauseValue::Text(v)) => self.op.holds(x, v.as_str()),
            _ => false,
        }
    }
}

/// Conjunction of clauses marking a low-consumption profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct LowConsumptionRule {
    clauses: Vec<Clause>,
}

#[derive(Serialize, Deserialize)]
struct RawRule {
    clauses: Vec<Clause>,
}

impl TryFrom<RawRule> for LowConsumptionRule {
    type Error = Error;

    fn try_from(raw: RawRule) -> Result<Self> {
        LowConsumptionRule::new(raw.clauses)
    }
}

impl From<LowConsumptionRule> for RawRule {
    fn from(rule: LowConsumptionRule) -> Self {
        RawRule { clauses: rule.clauses }
    }
}

impl LowConsumptionRule {
    pub fn new(clauses: Vec<Clause>) -> Result<Self> {
        for clause in &clauses {
            clause.validate()?;
        }
        Ok(Self { clauses })
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Values compared against the numeric record field `field`.
    pub fn numeric_breakpoints(&self, field: &str) -> Vec<f64> {
        self.clauses
            .iter()
            .filter(|c| c.field == field)
            .filter_map(|c| match c.value {
                ClauseValue::Number(v) => Some(v),
                ClauseValue::Text(_) => None,
            })
            .collect()
    }

    /// An empty conjunction holds for every record.
    pub fn evaluate(&self, record: &HouseholdRecord) -> bool {
        self.clauses.iter().all(|c| c.evaluate(record))
    }
}

impl Default for LowConsumptionRule {
    /// Non-electric heating and water heating, at most two occupants, and
    /// at most 50 m².
    fn default() -> Self {
        let clause = |field: &str, op, value| Clause {
            field: field.to_string(),
            op,
            value,
        };
        let text = |s: &str| ClauseValue::Text(s.to_string());
        Self {
            clauses: vec![
                clause("heating_type", Comparator::Ne, text("electric")),
                clause("water_heating_type", Comparator::Ne, text("electric")),
                clause("occupants", Comparator::Le, ClauseValue::Number(2.0)),
                clause("surface_m2", Comparator::Le, ClauseValue::Number(50.0)),
            ],
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SlotDescription {
    pub index: usize,
    pub name: &'static str,
    pub kind: SlotKind,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub codes: Vec<&'static str>,
}

#[derive(Debug, Serialize)]
pub struct SchemaDescription {
    pub schema: &'static str,
    pub slots: Vec<SlotDescription>,
}

/// The published slot order and code tables.
pub fn describe_schema() -> SchemaDescription {
    SchemaDescription {
        schema: FEATURE_SCHEMA,
        slots: Slot::ALL
            .iter()
            .map(|&slot| SlotDescription {
                index: slot.index(),
                name: slot.name(),
                kind: slot.kind(),
                codes: slot.category_labels(),
            })
            .collect(),
    }
}
