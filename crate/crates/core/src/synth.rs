//! Synthetic household populations with a known mean function.
//!
//! Record `i` is drawn from `SplitMix64::stream(seed, i)` alone, so any
//! subset of records can be regenerated independently.

use std::collections::BTreeMap;
use std::path::Path;

use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    AnnualConsumption, CookingType, Dataset, HeatingType, HouseType, HouseholdRecord, LabeledExample, TariffIndex,
    WaterHeatingType, MAX_POWER_KVA, MIN_READING_DAYS,
};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Category weights; they need not sum to 1.
pub type Weights<K> = BTreeMap<K, f64>;

fn weights<K: Ord>(pairs: impl IntoIterator<Item = (K, f64)>) -> Weights<K> {
    pairs.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceMarginal {
    /// Median surface per dwelling type (lognormal).
    pub median_m2: Weights<HouseType>,
    pub sigma: f64,
    pub min_m2: f64,
    pub max_m2: f64,
}

impl Default for SurfaceMarginal {
    fn default() -> Self {
        Self {
            median_m2: weights([(HouseType::Apartment, 55.0), (HouseType::House, 105.0)]),
            sigma: 0.35,
            min_m2: 12.0,
            max_m2: 350.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Marginals {
    pub house_type: Weights<HouseType>,
    pub surface: SurfaceMarginal,
    pub heating_type: Weights<HeatingType>,
    pub water_heating_type: Weights<WaterHeatingType>,
    pub cooking_type: Weights<CookingType>,
    /// Weights for 1, 2, … occupants.
    pub occupants: Vec<f64>,
    pub tariff_index: Weights<TariffIndex>,
    /// Weight per meter rating in kVA.
    pub max_power_kva: BTreeMap<u32, f64>,
    /// Uniform integer range of the meter window.
    pub reading_days: (u32, u32),
}

impl Default for Marginals {
    fn default() -> Self {
        use HeatingType as H;
        use WaterHeatingType as W;
        Self {
            house_type: weights([(HouseType::Apartment, 0.55), (HouseType::House, 0.45)]),
            surface: SurfaceMarginal::default(),
            heating_type: weights([
                (H::District, 0.05),
                (H::Electric, 0.35),
                (H::Fuel, 0.05),
                (H::Gas, 0.33),
                (H::HeatPump, 0.14),
                (H::Other, 0.08),
            ]),
            water_heating_type: weights([
                (W::Electric, 0.55),
                (W::Gas, 0.25),
                (W::Other, 0.05),
                (W::Thermodynamic, 0.15),
            ]),
            cooking_type: weights([
                (CookingType::Electric, 0.6),
                (CookingType::Gas, 0.25),
                (CookingType::Mixed, 0.15),
            ]),
            occupants: vec![0.30, 0.32, 0.16, 0.14, 0.06, 0.02],
            tariff_index: weights([(TariffIndex::Base, 0.6), (TariffIndex::PeakOffpeak, 0.4)]),
            max_power_kva: [0.02, 0.45, 0.30, 0.12, 0.05, 0.03, 0.015, 0.01, 0.005]
                .into_iter()
                .enumerate()
                .map(|(i, w)| (MAX_POWER_KVA[i], w))
                .collect(),
            reading_days: (MIN_READING_DAYS, 365),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    pub base_kwh: f64,
    pub per_occupant_kwh: f64,
    pub surface_heating_kwh_per_m2: Weights<HeatingType>,
    pub water_heating_kwh_per_occupant: Weights<WaterHeatingType>,
    /// Shape of the multiplicative lognormal noise.
    pub noise_sigma: f64,
    /// Share of targets replaced by a draw in `[100, 1000)`.
    pub p_low_outlier: f64,
    /// Share of targets replaced by a draw in `(10000, 25000]`.
    pub p_high_outlier: f64,
    pub marginals: Marginals,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        use HeatingType as H;
        use WaterHeatingType as W;
        Self {
            n: 10_000,
            seed: 0,
            base_kwh: 500.0,
            per_occupant_kwh: 600.0,
            surface_heating_kwh_per_m2: weights([
                (H::District, 6.0),
                (H::Electric, 55.0),
                (H::Fuel, 6.0),
                (H::Gas, 6.0),
                (H::HeatPump, 18.0),
                (H::Other, 6.0),
            ]),
            water_heating_kwh_per_occupant: weights([
                (W::Electric, 800.0),
                (W::Gas, 0.0),
                (W::Other, 0.0),
                (W::Thermodynamic, 300.0),
            ]),
            noise_sigma: 0.15,
            p_low_outlier: 0.04,
            p_high_outlier: 0.02,
            marginals: Marginals::default(),
        }
    }
}

fn check_weights<K: Ord + Copy + std::fmt::Display>(name: &str, w: &Weights<K>, all: &[K]) -> Result<()> {
    if let Some(k) = all.iter().find(|k| !w.contains_key(k)) {
        return Err(Error::Config(format!("{name}: missing weight for '{k}'")));
    }
    check_weight_values(name, w.values().copied())
}

fn check_weight_values(name: &str, values: impl Iterator<Item = f64> + Clone) -> Result<()> {
    if values.clone().any(|v| !(v.is_finite() && v >= 0.0)) {
        return Err(Error::Config(format!("{name}: weights must be finite and >= 0")));
    }
    if values.sum::<f64>() <= 0.0 {
        return Err(Error::Config(format!("{name}: weights sum to zero")));
    }
    Ok(())
}

fn check_coefficients<K: Ord + Copy + std::fmt::Display>(name: &str, c: &Weights<K>, all: &[K]) -> Result<()> {
    if let Some(k) = all.iter().find(|k| !c.contains_key(k)) {
        return Err(Error::Config(format!("{name}: missing coefficient for '{k}'")));
    }
    if c.values().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config(format!("{name}: coefficients must be finite and >= 0")));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let probs = [
            ("p_low_outlier", self.p_low_outlier),
            ("p_high_outlier", self.p_high_outlier),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.p_low_outlier + self.p_high_outlier >= 1.0 {
            return Err(Error::Config("p_low_outlier + p_high_outlier must be < 1".into()));
        }
        for (name, v) in [("base_kwh", self.base_kwh), ("per_occupant_kwh", self.per_occupant_kwh)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
        }
        check_coefficients(
            "surface_heating_kwh_per_m2",
            &self.surface_heating_kwh_per_m2,
            HeatingType::ALL,
        )?;
        check_coefficients(
            "water_heating_kwh_per_occupant",
            &self.water_heating_kwh_per_occupant,
            WaterHeatingType::ALL,
        )?;

        let m = &self.marginals;
        check_weights("house_type", &m.house_type, HouseType::ALL)?;
        check_weights("heating_type", &m.heating_type, HeatingType::ALL)?;
        check_weights("water_heating_type", &m.water_heating_type, WaterHeatingType::ALL)?;
        check_weights("cooking_type", &m.cooking_type, CookingType::ALL)?;
        check_weights("tariff_index", &m.tariff_index, TariffIndex::ALL)?;
        check_weight_values("occupants", m.occupants.iter().copied())?;
        check_weight_values("max_power_kva", m.max_power_kva.values().copied())?;
        if let Some(p) = m.max_power_kva.keys().find(|p| !MAX_POWER_KVA.contains(p)) {
            return Err(Error::Config(format!("max_power_kva: {p} is not a meter rating")));
        }
        let s = &m.surface;
        if let Some(h) = HouseType::ALL.iter().find(|h| !s.median_m2.contains_key(h)) {
            return Err(Error::Config(format!("surface.median_m2: missing '{h}'")));
        }
        if s.median_m2.values().any(|v| !(v.is_finite() && *v > 0.0))
            || !(s.sigma.is_finite() && s.sigma >= 0.0)
            || !(s.min_m2 > 0.0 && s.min_m2 <= s.max_m2)
        {
            return Err(Error::Config(
                "surface marginal: invalid median, sigma or bounds".into(),
            ));
        }
        let (lo, hi) = m.reading_days;
        if lo < MIN_READING_DAYS || lo > hi {
            return Err(Error::Config(format!(
                "reading_days range must satisfy {MIN_READING_DAYS} <= low <= high"
            )));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }
}

/// `base + per_occupant·occupants + heat(heating)·surface + water(water)·occupants`
pub fn oracle_mean(record: &HouseholdRecord, config: &GeneratorConfig) -> f64 {
    let occupants = f64::from(record.occupants);
    let heat = config
        .surface_heating_kwh_per_m2
        .get(&record.heating_type)
        .copied()
        .unwrap_or(0.0);
    let water = config
        .water_heating_kwh_per_occupant
        .get(&record.water_heating_type)
        .copied()
        .unwrap_or(0.0);
    config.base_kwh + config.per_occupant_kwh * occupants + heat * record.surface_m2 + water * occupants
}

/// Which draw produced a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contamination {
    None,
    Low,
    High,
}

fn pick<K: Copy>(rng: &mut SplitMix64, items: impl Iterator<Item = (K, f64)> + Clone) -> K {
    let total: f64 = items.clone().map(|(_, w)| w).sum();
    let mut u = rng.next_f64() * total;
    let mut last = None;
    for (k, w) in items {
        if w <= 0.0 {
            continue;
        }
        if u < w {
            return k;
        }
        u -= w;
        last = Some(k);
    }
    last.expect("validated weights have a positive entry")
}

fn sample(config: &GeneratorConfig, index: u64) -> (LabeledExample, Contamination) {
    let m = &config.marginals;
    let mut rng = SplitMix64::stream(config.seed, index);
    let house_type = pick(&mut rng, m.house_type.iter().map(|(k, w)| (*k, *w)));
    let median = m.surface.median_m2[&house_type];
    let surface = LogNormal::new(median.ln(), m.surface.sigma)
        .expect("validated sigma")
        .sample(&mut rng)
        .clamp(m.surface.min_m2, m.surface.max_m2)
        .round();
    let heating_type = pick(&mut rng, m.heating_type.iter().map(|(k, w)| (*k, *w)));
    let water_heating_type = pick(&mut rng, m.water_heating_type.iter().map(|(k, w)| (*k, *w)));
    let cooking_type = pick(&mut rng, m.cooking_type.iter().map(|(k, w)| (*k, *w)));
    let occupants = pick(
        &mut rng,
        m.occupants.iter().enumerate().map(|(i, w)| (i as u32 + 1, *w)),
    );
    let tariff_index = pick(&mut rng, m.tariff_index.iter().map(|(k, w)| (*k, *w)));
    let max_power_kva = pick(&mut rng, m.max_power_kva.iter().map(|(k, w)| (*k, *w)));
    let (lo, hi) = m.reading_days;
    let reading_days = lo + rng.below((hi - lo + 1) as usize) as u32;

    let record = HouseholdRecord {
        surface_m2: surface.max(1.0),
        heating_type,
        water_heating_type,
        cooking_type,
        occupants,
        house_type,
        tariff_index,
        max_power_kva,
        reading_days,
    };
    let u = rng.next_f64();
    let z: f64 = StandardNormal.sample(&mut rng);
    let v = rng.next_f64();
    let (target, kind) = if u < config.p_low_outlier {
        (100.0 + 900.0 * v, Contamination::Low)
    } else if u < config.p_low_outlier + config.p_high_outlier {
        (25_000.0 - 15_000.0 * v, Contamination::High)
    } else {
        let mu = oracle_mean(&record, config);
        let t = if config.noise_sigma == 0.0 {
            mu
        } else {
            mu * (config.noise_sigma * z).exp()
        };
        (t, Contamination::None)
    };
    let example = LabeledExample {
        record,
        target: AnnualConsumption::new(target).expect("targets are finite and positive"),
    };
    (example, kind)
}

/// Examples with the draw that produced each target.
pub fn generate_labeled(config: &GeneratorConfig) -> Result<Vec<(LabeledExample, Contamination)>> {
    config.validate()?;
    Ok((0..config.n as u64)
        .into_par_iter()
        .map(|i| sample(config, i))
        .collect())
}

pub fn generate(config: &GeneratorConfig) -> Result<Dataset> {
    let examples = generate_labeled(config)?.into_iter().map(|(e, _)| e).collect();
    Ok(Dataset::new(examples))
}
