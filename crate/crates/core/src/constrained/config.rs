use serde::{Deserialize, Serialize};

use super::repair::repair_surface_chains;
use super::search::{search_schedule, Candidate, SearchMode, DEFAULT_EXHAUSTIVE_CAP};
use super::{fit_with_schedule, ConstrainedTree, LeafModel, LevelParams, SlotLabels, ThresholdMode, MAX_LEVELS};
use crate::error::{Error, Result};
use crate::features::Slot;
use crate::tree::TrainMatrix;

/// Slots a schedule may use; surface may fill two levels, the others one.
pub const SCHEDULE_CANDIDATES: [Slot; 6] = [
    Slot::LowConsumption,
    Slot::TariffIndex,
    Slot::Occupants,
    Slot::HeatingType,
    Slot::WaterHeatingType,
    Slot::Surface,
];

pub const DEFAULT_SCHEDULE: [Slot; 7] = [
    Slot::LowConsumption,
    Slot::TariffIndex,
    Slot::Occupants,
    Slot::HeatingType,
    Slot::WaterHeatingType,
    Slot::Surface,
    Slot::Surface,
];

pub const DEFAULT_MIN_BUCKET: usize = 50;

fn max_uses(slot: Slot) -> usize {
    match slot {
        Slot::Surface => 2,
        s if SCHEDULE_CANDIDATES.contains(&s) => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKeyword {
    Search,
}

/// A fixed level list, or the keyword `"search"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleChoice {
    Fixed(Vec<Slot>),
    Keyword(ScheduleKeyword),
}

impl ScheduleChoice {
    pub fn search() -> Self {
        ScheduleChoice::Keyword(ScheduleKeyword::Search)
    }
}

impl Default for ScheduleChoice {
    fn default() -> Self {
        ScheduleChoice::Fixed(DEFAULT_SCHEDULE.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstrainedTreeConfig {
    pub min_bucket: usize,
    pub schedule: ScheduleChoice,
    pub search_mode: SearchMode,
    pub leaf_model: LeafModel,
    pub threshold_mode: ThresholdMode,
    pub exhaustive_cap: u64,
    /// Merge leaves along surface chains that step down, and hold
    /// household predictions non-decreasing in surface.
    pub monotone_surface: bool,
}

impl Default for ConstrainedTreeConfig {
    fn default() -> Self {
        Self {
            min_bucket: DEFAULT_MIN_BUCKET,
            schedule: ScheduleChoice::default(),
            search_mode: SearchMode::Greedy,
            leaf_model: LeafModel::SurfaceLinear,
            threshold_mode: ThresholdMode::PerNode,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            monotone_surface: true,
        }
    }
}

/// Checks length and per-slot use limits of a household schedule.
pub fn validate_household_schedule(schedule: &[Slot]) -> Result<()> {
    if schedule.len() > MAX_LEVELS {
        return Err(Error::Config(format!(
            "schedule has {} levels, at most {MAX_LEVELS} allowed",
            schedule.len()
        )));
    }
    for slot in Slot::ALL {
        let used = schedule.iter().filter(|&&s| s == slot).count();
        if used > max_uses(slot) {
            return Err(Error::Config(if max_uses(slot) == 0 {
                format!("{slot} is not a schedule candidate")
            } else {
                format!("{slot} may fill at most {} level(s), got {used}", max_uses(slot))
            }));
        }
    }
    Ok(())
}

impl ConstrainedTreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_bucket == 0 {
            return Err(Error::Config("min_bucket must be at least 1".into()));
        }
        if let ScheduleChoice::Fixed(s) = &self.schedule {
            validate_household_schedule(s)?;
        }
        Ok(())
    }

    fn params(&self) -> LevelParams {
        LevelParams {
            min_bucket: self.min_bucket,
            leaf_model: self.leaf_model,
            threshold_mode: self.threshold_mode,
            surface_slot: Slot::Surface.index(),
        }
    }

    /// Fits on a matrix encoded with the household feature schema.
    pub fn fit(&self, m: &TrainMatrix) -> Result<ConstrainedTree> {
        self.validate()?;
        let params = self.params();
        let mut tree = match &self.schedule {
            ScheduleChoice::Fixed(slots) => {
                let levels: Vec<usize> = slots.iter().map(|s| s.index()).collect();
                fit_with_schedule(m, &levels, &params)?
            }
            ScheduleChoice::Keyword(ScheduleKeyword::Search) => {
                let candidates: Vec<Candidate> = SCHEDULE_CANDIDATES
                    .iter()
                    .map(|&s| Candidate {
                        slot: s.index(),
                        max_uses: max_uses(s),
                    })
                    .collect();
                search_schedule(m, &candidates, &params, self.search_mode, self.exhaustive_cap)?.1
            }
        };
        if self.monotone_surface {
            repair_surface_chains(&mut tree, m);
            tree.monotone_surface = true;
        }
        Ok(tree)
    }
}

/// Slot names and category labels of the household schema.
pub struct HouseholdLabels;

impl SlotLabels for HouseholdLabels {
    fn slot_name(&self, slot: usize) -> String {
        Slot::from_index(slot).map_or_else(|| format!("x{slot}"), |s| s.name().to_string())
    }

    fn category_label(&self, slot: usize, code: u32) -> String {
        Slot::from_index(slot)
            .and_then(|s| s.category_label(code))
            .map_or_else(|| code.to_string(), str::to_string)
    }
}
