//! CSV ingestion and export of labelled household data.
//!
//! Columns: `surface_m2, heating_type, water_heating_type, cooking_type,
//! occupants, house_type, tariff_index, max_power_kva, reading_days,
//! observed_kwh[, car_kwh]`. When `car_kwh` is absent or empty the target is
//! annualized from `observed_kwh` and `reading_days`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{annualize_car, AnnualConsumption, Dataset, HouseholdRecord, LabeledExample};
use crate::error::{Error, Result};

/// Column names for each field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub surface_m2: String,
    pub heating_type: String,
    pub water_heating_type: String,
    pub cooking_type: String,
    pub occupants: String,
    pub house_type: String,
    pub tariff_index: String,
    pub max_power_kva: String,
    pub reading_days: String,
    pub observed_kwh: String,
    pub car_kwh: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            surface_m2: "surface_m2".into(),
            heating_type: "heating_type".into(),
            water_heating_type: "water_heating_type".into(),
            cooking_type: "cooking_type".into(),
            occupants: "occupants".into(),
            house_type: "house_type".into(),
            tariff_index: "tariff_index".into(),
            max_power_kva: "max_power_kva".into(),
            reading_days: "reading_days".into(),
            observed_kwh: "observed_kwh".into(),
            car_kwh: "car_kwh".into(),
        }
    }
}

impl CsvSchema {
    fn required(&self) -> [&str; 10] {
        [
            &self.surface_m2,
            &self.heating_type,
            &self.water_heating_type,
            &self.cooking_type,
            &self.occupants,
            &self.house_type,
            &self.tariff_index,
            &self.max_power_kva,
            &self.reading_days,
            &self.observed_kwh,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Line number in the source file; the header is line 1.
    pub row_number: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub rejections: Vec<Rejection>,
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Ingested> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();

    let position = |name: &str| header.iter().position(|h| h == name);
    let mut columns = [0usize; 10];
    for (slot, name) in columns.iter_mut().zip(schema.required()) {
        *slot = position(name).ok_or_else(|| Error::Schema(format!("missing column '{name}'")))?;
    }
    let car_column = position(&schema.car_kwh);
    let unexpected: Vec<&str> = header
        .iter()
        .filter(|h| !schema.required().contains(h) && *h != schema.car_kwh)
        .collect();
    if !unexpected.is_empty() {
        return Err(Error::Schema(format!("unexpected columns {unexpected:?}")));
    }

    let mut examples = Vec::new();
    let mut rejections = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_number = i as u64 + 2;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                rejections.push(Rejection {
                    row_number,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let field = |k: usize| row.get(columns[k]).unwrap_or("");
        let car = car_column.map(|c| row.get(c).unwrap_or(""));
        match parse_row(&field, car) {
            Ok(example) => examples.push(example),
            Err(reason) => rejections.push(Rejection { row_number, reason }),
        }
    }
    Ok(Ingested {
        dataset: Dataset::new(examples),
        rejections,
    })
}

fn number<T: std::str::FromStr>(name: &str, raw: &str) -> std::result::Result<T, String> {
    raw.parse().map_err(|_| format!("non-numeric value '{raw}' for {name}"))
}

fn category<T: std::str::FromStr<Err = Error>>(raw: &str) -> std::result::Result<T, String> {
    raw.parse().map_err(|e: Error| match e {
        Error::InvalidRecord(msg) => msg,
        other => other.to_string(),
    })
}

fn parse_row<'a>(
    field: &dyn Fn(usize) -> &'a str,
    car: Option<&'a str>,
) -> std::result::Result<LabeledExample, String> {
    let record = HouseholdRecord {
        surface_m2: number("surface_m2", field(0))?,
        heating_type: category(field(1))?,
        water_heating_type: category(field(2))?,
        cooking_type: category(field(3))?,
        occupants: number("occupants", field(4))?,
        house_type: category(field(5))?,
        tariff_index: category(field(6))?,
        max_power_kva: number("max_power_kva", field(7))?,
        reading_days: number("reading_days", field(8))?,
    };
    record.validate().map_err(|e| e.to_string())?;
    let observed: f64 = number("observed_kwh", field(9))?;

    let target = match car.filter(|c| !c.is_empty()) {
        Some(raw) => AnnualConsumption::new(number("car_kwh", raw)?),
        None => annualize_car(observed, record.reading_days),
    }
    .map_err(|e| e.to_string())?;
    Ok(LabeledExample { record, target })
}

pub fn write_rejections(rejections: &[Rejection], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rejections {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

const HEADER: [&str; 11] = [
    "surface_m2",
    "heating_type",
    "water_heating_type",
    "cooking_type",
    "occupants",
    "house_type",
    "tariff_index",
    "max_power_kva",
    "reading_days",
    "observed_kwh",
    "car_kwh",
];

/// Writes the standard header; `observed_kwh` is reconstructed as
/// `car_kwh * reading_days / 365`.
pub fn write_dataset<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for e in ds.iter() {
        let r = &e.record;
        let car = e.target.kwh();
        let observed = car * f64::from(r.reading_days) / 365.0;
        w.write_record([
            r.surface_m2.to_string(),
            r.heating_type.to_string(),
            r.water_heating_type.to_string(),
            r.cooking_type.to_string(),
            r.occupants.to_string(),
            r.house_type.to_string(),
            r.tariff_index.to_string(),
            r.max_power_kva.to_string(),
            r.reading_days.to_string(),
            observed.to_string(),
            car.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_dataset_file(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(ds, std::io::BufWriter::new(file))
}
