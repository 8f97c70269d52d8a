//! Weekly calendar, univariate series and the county dataset.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Series id of the country-level aggregate.
pub const COUNTRY: &str = "COUNTRY";

/// The twenty counties, in the column order of the public cases file.
pub const COUNTIES: [&str; 20] = [
    "BUDAPEST", "BARANYA", "BACS", "BEKES", "BORSOD", "CSONGRAD", "FEJER", "GYOR", "HAJDU", "HEVES",
    "JASZ", "KOMAROM", "NOGRAD", "PEST", "SOMOGY", "SZABOLCS", "TOLNA", "VAS", "VESZPREM", "ZALA",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("series `{id}`: {dates} dates but {values} values")]
    LengthMismatch { id: String, dates: usize, values: usize },
    #[error("series `{id}`: dates at index {index} are not 7 days apart ({prev} -> {next})")]
    Spacing { id: String, index: usize, prev: WeekDate, next: WeekDate },
    #[error("series `{id}`: non-finite value at index {index}")]
    NonFinite { id: String, index: usize },
    #[error("series `{id}`: slice [{start}, {end}) out of range for length {len}")]
    SliceRange { id: String, start: usize, end: usize, len: usize },
    #[error("series `{id}` does not share the dataset date index")]
    IndexMismatch { id: String },
    #[error("duplicate series `{0}`")]
    Duplicate(String),
    #[error("dataset has no series")]
    Empty,
}

/// Date of one weekly observation. Successive observations are exactly seven days apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeekDate(NaiveDate);

impl WeekDate {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(WeekDate)
    }

    pub fn date(self) -> NaiveDate {
        self.0
    }

    pub fn successor(self) -> Self {
        WeekDate(self.0 + Duration::days(7))
    }

    /// Signed distance in days from `other` to `self`.
    pub fn days_since(self, other: WeekDate) -> i64 {
        (self.0 - other.0).num_days()
    }

    /// ISO 8601 week number, 1..=53.
    pub fn iso_week(self) -> u32 {
        self.0.iso_week().week()
    }

    pub fn year(self) -> i32 {
        self.0.year()
    }

    /// `n` consecutive weeks starting at `self`.
    pub fn weeks_from(self, n: usize) -> Vec<WeekDate> {
        std::iter::successors(Some(self), |d| Some(d.successor())).take(n).collect()
    }
}

impl From<NaiveDate> for WeekDate {
    fn from(d: NaiveDate) -> Self {
        WeekDate(d)
    }
}

impl fmt::Display for WeekDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

/// Upper-case ASCII form of a county name: accents stripped, whitespace trimmed.
///
/// `Torna` is read as `TOLNA`; the two spellings name the same county.
pub fn canonical_county(name: &str) -> String {
    let folded: String = name
        .trim()
        .chars()
        .map(|c| match c {
            'á' | 'Á' => 'A',
            'é' | 'É' => 'E',
            'í' | 'Í' => 'I',
            'ó' | 'Ó' | 'ö' | 'Ö' | 'ő' | 'Ő' => 'O',
            'ú' | 'Ú' | 'ü' | 'Ü' | 'ű' | 'Ű' => 'U',
            c => c.to_ascii_uppercase(),
        })
        .collect();
    if folded == "TORNA" {
        "TOLNA".to_string()
    } else {
        folded
    }
}

/// Position of a canonical county name in [`COUNTIES`], if it is one of them.
pub fn county_rank(name: &str) -> Option<usize> {
    COUNTIES.iter().position(|c| *c == name)
}

/// A weekly univariate series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    id: String,
    dates: Vec<WeekDate>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        id: impl Into<String>,
        dates: Vec<WeekDate>,
        values: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        let id = id.into();
        if dates.len() != values.len() {
            return Err(SeriesError::LengthMismatch {
                id,
                dates: dates.len(),
                values: values.len(),
            });
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[1].days_since(pair[0]) != 7 {
                return Err(SeriesError::Spacing { id, index: i + 1, prev: pair[0], next: pair[1] });
            }
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { id, index });
        }
        Ok(Self { id, dates, values })
    }

    /// Series of `values` on consecutive weeks starting at `start`.
    pub fn weekly(
        id: impl Into<String>,
        start: WeekDate,
        values: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        let dates = start.weeks_from(values.len());
        Self::new(id, dates, values)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dates(&self) -> &[WeekDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same dates, new values. Lengths must agree.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, SeriesError> {
        Self::new(self.id.clone(), self.dates.clone(), values)
    }

    pub fn with_id(&self, id: impl Into<String>) -> Self {
        Self { id: id.into(), ..self.clone() }
    }

    /// Contiguous sub-series `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, SeriesError> {
        if start >= end || end > self.len() {
            return Err(SeriesError::SliceRange {
                id: self.id.clone(),
                start,
                end,
                len: self.len(),
            });
        }
        Ok(Self {
            id: self.id.clone(),
            dates: self.dates[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        })
    }

    /// Appends `other`, which must start one week after `self` ends.
    pub fn concat(&self, other: &TimeSeries) -> Result<Self, SeriesError> {
        let mut dates = self.dates.clone();
        dates.extend_from_slice(&other.dates);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::new(self.id.clone(), dates, values)
    }
}

/// County series sharing one weekly date index, keyed by canonical name.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dates: Vec<WeekDate>,
    counties: BTreeMap<String, TimeSeries>,
}

impl Dataset {
    /// Builds a dataset from county series. Ids are canonicalized; every series
    /// must carry the same dates.
    ///
    /// Any non-empty set of counties is accepted here; ingestion of the cases
    /// file is what insists on all twenty.
    pub fn new(series: impl IntoIterator<Item = TimeSeries>) -> Result<Self, SeriesError> {
        let mut counties = BTreeMap::new();
        let mut dates: Option<Vec<WeekDate>> = None;
        for s in series {
            let name = canonical_county(&s.id);
            match &dates {
                None => dates = Some(s.dates.clone()),
                Some(d) if *d != s.dates => return Err(SeriesError::IndexMismatch { id: name }),
                Some(_) => {}
            }
            let s = s.with_id(name.clone());
            if counties.insert(name.clone(), s).is_some() {
                return Err(SeriesError::Duplicate(name));
            }
        }
        let dates = dates.ok_or(SeriesError::Empty)?;
        Ok(Self { dates, counties })
    }

    pub fn dates(&self) -> &[WeekDate] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn county(&self, name: &str) -> Option<&TimeSeries> {
        self.counties.get(&canonical_county(name))
    }

    pub fn counties(&self) -> impl Iterator<Item = &TimeSeries> {
        self.counties.values()
    }

    /// County names in canonical column order: known counties first in
    /// [`COUNTIES`] order, anything else alphabetically after them.
    pub fn county_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.counties.keys().map(String::as_str).collect();
        names.sort_by_key(|n| (county_rank(n).unwrap_or(usize::MAX), *n));
        names
    }

    /// Country-level series: the elementwise sum of every county.
    pub fn aggregate_country(&self) -> TimeSeries {
        let mut total = vec![0.0; self.dates.len()];
        for s in self.counties.values() {
            for (t, v) in total.iter_mut().zip(&s.values) {
                *t += v;
            }
        }
        TimeSeries { id: COUNTRY.to_string(), dates: self.dates.clone(), values: total }
    }

    /// County series followed by the country aggregate, in canonical order.
    pub fn all_series(&self) -> Vec<TimeSeries> {
        let mut out: Vec<TimeSeries> =
            self.county_names().into_iter().map(|n| self.counties[n].clone()).collect();
        out.push(self.aggregate_country());
        out
    }

    /// Looks up a county or the `COUNTRY` aggregate.
    pub fn series(&self, id: &str) -> Option<TimeSeries> {
        let id = canonical_county(id);
        if id == COUNTRY {
            Some(self.aggregate_country())
        } else {
            self.counties.get(&id).cloned()
        }
    }
}
