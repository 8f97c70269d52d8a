//! Reading the weekly cases file and the county population table.
//!
//! The cases file is `Date,<COUNTY>...` with one row per week. Dates may be
//! `DD/MM/YYYY` (as in the public file) or ISO `YYYY-MM-DD`, but not both in
//! one file. Every malformed row is a hard error that names its data row
//! (1-based, header excluded).

use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{canonical_county, county_rank, Dataset, SeriesError, TimeSeries, WeekDate, COUNTIES, COUNTRY};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("input has no data rows")]
    NoRows,
    #[error("header: first column must be a date column, found `{0}`")]
    DateHeader(String),
    #[error("header column {column}: unknown county `{name}`")]
    UnknownCounty { column: usize, name: String },
    #[error("header column {column}: duplicate county `{name}`")]
    DuplicateCounty { column: usize, name: String },
    #[error("missing county column(s): {}", .0.join(", "))]
    MissingCounties(Vec<String>),
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount { row: usize, expected: usize, found: usize },
    #[error("row {row}: unparseable date `{value}`")]
    BadDate { row: usize, value: String },
    #[error("row {row}: date `{value}` mixes formats with earlier rows")]
    MixedDateFormats { row: usize, value: String },
    #[error("row {row}: duplicate date {date}")]
    DuplicateDate { row: usize, date: WeekDate },
    #[error("row {row}: gap of {days} days after {prev} (expected 7)")]
    Gap { row: usize, prev: WeekDate, days: i64 },
    #[error("row {row}, column {column}: invalid case count `{value}`")]
    BadCount { row: usize, column: String, value: String },
    #[error("row {row}, column {column}: negative case count `{value}`")]
    NegativeCount { row: usize, column: String, value: String },
    #[error("population header must be `county,year,population`")]
    PopulationHeader,
    #[error("population row {row}: {message}")]
    PopulationRecord { row: usize, message: String },
    #[error("population row {row}: population must be positive for {county}")]
    NonPositivePopulation { row: usize, county: String },
    #[error("population years for {county} are not strictly increasing")]
    UnsortedYears { county: String },
    #[error("no population entries for county {0}")]
    MissingPopulation(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DateFormat {
    DayFirst,
    Iso,
}

fn parse_date(raw: &str) -> Option<(NaiveDate, DateFormat)> {
    let raw = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Some((d, DateFormat::Iso));
    }
    NaiveDate::parse_from_str(raw, "%d/%m/%Y").ok().map(|d| (d, DateFormat::DayFirst))
}

fn reader(raw: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(raw)
}

fn csv_err(e: csv::Error) -> IngestError {
    IngestError::Csv(e.to_string())
}

/// Parses the weekly cases file into a [`Dataset`] holding all twenty counties.
pub fn parse_cases_csv(raw: &[u8]) -> Result<Dataset, IngestError> {
    let mut rdr = reader(raw);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let first = header.get(0).unwrap_or("");
    if !first.eq_ignore_ascii_case("date") {
        return Err(IngestError::DateHeader(first.to_string()));
    }
    let mut names = Vec::with_capacity(header.len().saturating_sub(1));
    for (column, name) in header.iter().enumerate().skip(1) {
        let canon = canonical_county(name);
        if county_rank(&canon).is_none() {
            return Err(IngestError::UnknownCounty { column: column + 1, name: name.to_string() });
        }
        if names.contains(&canon) {
            return Err(IngestError::DuplicateCounty { column: column + 1, name: canon });
        }
        names.push(canon);
    }
    let missing: Vec<String> =
        COUNTIES.iter().filter(|c| !names.iter().any(|n| n == *c)).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingCounties(missing));
    }

    let mut dates: Vec<WeekDate> = Vec::new();
    let mut seen = HashSet::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut format = None;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(IngestError::FieldCount { row, expected: header.len(), found: record.len() });
        }
        let raw_date = &record[0];
        let (date, fmt) = parse_date(raw_date)
            .ok_or_else(|| IngestError::BadDate { row, value: raw_date.to_string() })?;
        match format {
            None => format = Some(fmt),
            Some(f) if f != fmt => {
                return Err(IngestError::MixedDateFormats { row, value: raw_date.to_string() })
            }
            Some(_) => {}
        }
        let date = WeekDate::from(date);
        if !seen.insert(date) {
            return Err(IngestError::DuplicateDate { row, date });
        }
        if let Some(&prev) = dates.last() {
            let days = date.days_since(prev);
            if days != 7 {
                return Err(IngestError::Gap { row, prev, days });
            }
        }
        dates.push(date);
        for (j, cell) in record.iter().skip(1).enumerate() {
            let count = parse_count(cell).map_err(|negative| {
                let (column, value) = (names[j].clone(), cell.to_string());
                if negative {
                    IngestError::NegativeCount { row, column, value }
                } else {
                    IngestError::BadCount { row, column, value }
                }
            })?;
            columns[j].push(count);
        }
    }
    if dates.is_empty() {
        return Err(IngestError::NoRows);
    }
    let series = names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| TimeSeries::new(name, dates.clone(), values))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(series)?)
}

/// `Err(true)` for a negative integer, `Err(false)` for anything else unparseable.
fn parse_count(cell: &str) -> Result<f64, bool> {
    match cell.parse::<u64>() {
        Ok(v) => Ok(v as f64),
        Err(_) => Err(cell.parse::<i64>().is_ok_and(|v| v < 0)),
    }
}

/// Canonical cases file: ISO dates, counties in canonical column order.
pub fn write_cases_csv(dataset: &Dataset) -> String {
    let names = dataset.county_names();
    let mut out = String::from("Date");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    let series: Vec<&TimeSeries> = names.iter().map(|n| dataset.county(n).unwrap()).collect();
    for (i, date) in dataset.dates().iter().enumerate() {
        out.push_str(&date.to_string());
        for s in &series {
            out.push(',');
            out.push_str(&s.values()[i].to_string());
        }
        out.push('\n');
    }
    out
}

/// Yearly population anchors per county.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PopulationTable {
    entries: BTreeMap<String, Vec<(i32, u64)>>,
}

impl PopulationTable {
    pub fn anchors(&self, county: &str) -> Option<&[(i32, u64)]> {
        self.entries.get(&canonical_county(county)).map(Vec::as_slice)
    }

    pub fn counties(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Debug, Deserialize)]
struct PopulationRow {
    county: String,
    year: i32,
    population: i64,
}

/// Parses `county,year,population` rows. Years must be strictly increasing
/// within each county.
pub fn parse_population_csv(raw: &[u8]) -> Result<PopulationTable, IngestError> {
    let mut rdr = reader(raw);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let expected = ["county", "year", "population"];
    if header.len() != 3 || !header.iter().zip(expected).all(|(h, e)| h.eq_ignore_ascii_case(e)) {
        return Err(IngestError::PopulationHeader);
    }
    let mut entries: BTreeMap<String, Vec<(i32, u64)>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_err)?;
        let parsed: PopulationRow = rec
            .deserialize(Some(&header))
            .map_err(|e| IngestError::PopulationRecord { row, message: e.to_string() })?;
        let county = canonical_county(&parsed.county);
        if county_rank(&county).is_none() {
            return Err(IngestError::PopulationRecord {
                row,
                message: format!("unknown county `{}`", parsed.county),
            });
        }
        if parsed.population <= 0 {
            return Err(IngestError::NonPositivePopulation { row, county });
        }
        let years = entries.entry(county.clone()).or_default();
        if years.last().is_some_and(|&(y, _)| y >= parsed.year) {
            return Err(IngestError::UnsortedYears { county });
        }
        years.push((parsed.year, parsed.population as u64));
    }
    Ok(PopulationTable { entries })
}

/// Weekly population of one county (or the country), aligned to the dataset dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSeries {
    pub county: String,
    dates: Vec<WeekDate>,
    values: Vec<f64>,
}

impl PopulationSeries {
    pub fn new(county: impl Into<String>, dates: Vec<WeekDate>, values: Vec<f64>) -> Self {
        assert_eq!(dates.len(), values.len(), "population dates/values length mismatch");
        assert!(values.iter().all(|v| *v > 0.0 && v.is_finite()), "population must be positive");
        Self { county: county.into(), dates, values }
    }

    /// Same population at every date.
    pub fn constant(county: impl Into<String>, dates: &[WeekDate], population: f64) -> Self {
        Self::new(county, dates.to_vec(), vec![population; dates.len()])
    }

    pub fn dates(&self) -> &[WeekDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Population on `date`, if `date` is on this series' weekly index.
    pub fn at(&self, date: WeekDate) -> Option<f64> {
        let first = *self.dates.first()?;
        let days = date.days_since(first);
        if days < 0 || days % 7 != 0 {
            return None;
        }
        let i = (days / 7) as usize;
        (self.dates.get(i) == Some(&date)).then(|| self.values[i])
    }
}

/// Population on `date` by linear interpolation between January-1 anchors,
/// held constant outside the anchored years.
pub fn interpolate_population(anchors: &[(i32, u64)], date: WeekDate) -> f64 {
    let jan1 = |y: i32| WeekDate::from(NaiveDate::from_ymd_opt(y, 1, 1).expect("valid year"));
    let (first, last) = (anchors[0], anchors[anchors.len() - 1]);
    if date <= jan1(first.0) {
        return first.1 as f64;
    }
    if date >= jan1(last.0) {
        return last.1 as f64;
    }
    let k = anchors.partition_point(|&(y, _)| jan1(y) <= date);
    let (y0, p0) = anchors[k - 1];
    let (y1, p1) = anchors[k];
    let span = jan1(y1).days_since(jan1(y0)) as f64;
    let frac = date.days_since(jan1(y0)) as f64 / span;
    p0 as f64 + frac * (p1 as f64 - p0 as f64)
}

/// Weekly population for every dataset county, plus the `COUNTRY` sum.
pub fn attach_population(
    dataset: &Dataset,
    table: &PopulationTable,
) -> Result<BTreeMap<String, PopulationSeries>, IngestError> {
    let dates = dataset.dates().to_vec();
    let mut out = BTreeMap::new();
    let mut total = vec![0.0; dates.len()];
    for name in dataset.county_names() {
        let anchors = table
            .anchors(name)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| IngestError::MissingPopulation(name.to_string()))?;
        let values: Vec<f64> = dates.iter().map(|&d| interpolate_population(anchors, d)).collect();
        for (t, v) in total.iter_mut().zip(&values) {
            *t += v;
        }
        out.insert(name.to_string(), PopulationSeries::new(name, dates.clone(), values));
    }
    out.insert(COUNTRY.to_string(), PopulationSeries::new(COUNTRY, dates, total));
    Ok(out)
}
