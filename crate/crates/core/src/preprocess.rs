//! Train/test splitting, the two normalization methods, and window framing.
//!
//! Method 1 maps values affinely onto `[-1, 1]` using the training extremes.
//! Method 2 first converts cases to a percentage of the county population on
//! the same date, then applies the Method 1 map fitted on the converted
//! training values, so losses under both methods live on the same scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PopulationSeries;
use crate::series::{SeriesError, TimeSeries, WeekDate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    Ratio(f64),
    #[error("series of length {len} is too short to split at ratio {ratio}")]
    TooShort { len: usize, ratio: f64 },
    #[error("training values are constant ({0}); cannot rescale")]
    ConstantTrain(f64),
    #[error("no population for date {0}")]
    MissingPopulation(WeekDate),
    #[error("{values} values but {dates} dates")]
    DateCount { values: usize, dates: usize },
    #[error("window length {window} needs more than {window} values, got {len}")]
    WindowTooLong { window: usize, len: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Leading training part and trailing test part of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: TimeSeries,
    pub test: TimeSeries,
    pub ratio: f64,
}

/// First `floor(ratio * n)` points train, the rest test.
pub fn split_train_test(series: &TimeSeries, ratio: f64) -> Result<Split, PreprocessError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PreprocessError::Ratio(ratio));
    }
    let n = series.len();
    let n_train = (ratio * n as f64).floor() as usize;
    if n < 5 || n_train == 0 || n_train == n {
        return Err(PreprocessError::TooShort { len: n, ratio });
    }
    Ok(Split { train: series.slice(0, n_train)?, test: series.slice(n_train, n)?, ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Min-max onto `[-1, 1]`.
    #[serde(rename = "M1")]
    MinMax,
    /// Percent of population, then min-max onto `[-1, 1]`.
    #[serde(rename = "M2")]
    PopulationPercent,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::MinMax, Method::PopulationPercent];

    pub fn label(self) -> &'static str {
        match self {
            Method::MinMax => "M1",
            Method::PopulationPercent => "M2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "1" | "M1" => Some(Method::MinMax),
            "2" | "M2" => Some(Method::PopulationPercent),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Everything needed to map between case counts and model space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub method: Method,
    /// Extremes of the training values after the population stage (if any).
    pub train_min: f64,
    pub train_max: f64,
    pub population: Option<PopulationSeries>,
}

impl NormalizationParams {
    fn population_at(&self, date: WeekDate) -> Result<Option<f64>, PreprocessError> {
        match &self.population {
            None => Ok(None),
            Some(p) => p.at(date).map(Some).ok_or(PreprocessError::MissingPopulation(date)),
        }
    }

    fn check_dates(values: &[f64], dates: &[WeekDate]) -> Result<(), PreprocessError> {
        if values.len() != dates.len() {
            return Err(PreprocessError::DateCount { values: values.len(), dates: dates.len() });
        }
        Ok(())
    }

    /// Case counts to model space.
    pub fn apply(&self, values: &[f64], dates: &[WeekDate]) -> Result<Vec<f64>, PreprocessError> {
        Self::check_dates(values, dates)?;
        let span = self.train_max - self.train_min;
        values
            .iter()
            .zip(dates)
            .map(|(&x, &d)| {
                let v = match self.population_at(d)? {
                    Some(p) => x / p * 100.0,
                    None => x,
                };
                Ok(2.0 * (v - self.train_min) / span - 1.0)
            })
            .collect()
    }

    /// Model space back to case counts; the exact inverse of [`apply`](Self::apply).
    pub fn invert(&self, values: &[f64], dates: &[WeekDate]) -> Result<Vec<f64>, PreprocessError> {
        Self::check_dates(values, dates)?;
        let span = self.train_max - self.train_min;
        values
            .iter()
            .zip(dates)
            .map(|(&y, &d)| {
                let v = (y + 1.0) / 2.0 * span + self.train_min;
                Ok(match self.population_at(d)? {
                    Some(p) => v * p / 100.0,
                    None => v,
                })
            })
            .collect()
    }
}

/// A split mapped into model space.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub train: TimeSeries,
    pub test: TimeSeries,
    pub params: NormalizationParams,
}

fn extremes(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn fit_and_apply(
    split: &Split,
    method: Method,
    population: Option<PopulationSeries>,
) -> Result<Normalized, PreprocessError> {
    let stage = match &population {
        Some(p) => percent_of_population(&split.train, p)?,
        None => split.train.clone(),
    };
    let (train_min, train_max) = extremes(stage.values());
    if train_max <= train_min {
        return Err(PreprocessError::ConstantTrain(train_min));
    }
    let params = NormalizationParams { method, train_min, train_max, population };
    let train = split.train.with_values(params.apply(split.train.values(), split.train.dates())?)?;
    let test = split.test.with_values(params.apply(split.test.values(), split.test.dates())?)?;
    Ok(Normalized { train, test, params })
}

/// Method 1: min-max onto `[-1, 1]`, fitted on the training part only.
pub fn normalize_method1(split: &Split) -> Result<Normalized, PreprocessError> {
    fit_and_apply(split, Method::MinMax, None)
}

/// Method 2: percent of population, then the Method 1 map fitted on the
/// converted training part.
pub fn normalize_method2(split: &Split, population: &PopulationSeries) -> Result<Normalized, PreprocessError> {
    fit_and_apply(split, Method::PopulationPercent, Some(population.clone()))
}

pub fn normalize(
    split: &Split,
    method: Method,
    population: Option<&PopulationSeries>,
) -> Result<Normalized, PreprocessError> {
    match (method, population) {
        (Method::MinMax, _) => normalize_method1(split),
        (Method::PopulationPercent, Some(p)) => normalize_method2(split, p),
        (Method::PopulationPercent, None) => {
            Err(PreprocessError::MissingPopulation(split.train.dates()[0]))
        }
    }
}

/// Inverse of whichever normalization produced `params`.
pub fn denormalize(
    values: &[f64],
    dates: &[WeekDate],
    params: &NormalizationParams,
) -> Result<Vec<f64>, PreprocessError> {
    params.invert(values, dates)
}

/// Cases as a percentage of the population on the same date (no rescaling).
pub fn percent_of_population(
    series: &TimeSeries,
    population: &PopulationSeries,
) -> Result<TimeSeries, PreprocessError> {
    let values = series
        .values()
        .iter()
        .zip(series.dates())
        .map(|(&x, &d)| {
            population.at(d).map(|p| x / p * 100.0).ok_or(PreprocessError::MissingPopulation(d))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(series.with_values(values)?)
}

/// Supervised pairs: `inputs[i] = values[i..i + w]`, `targets[i] = values[i + w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub window_len: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

pub fn make_windows(values: &[f64], window_len: usize) -> Result<WindowedDataset, PreprocessError> {
    if window_len == 0 || values.len() <= window_len {
        return Err(PreprocessError::WindowTooLong { window: window_len, len: values.len() });
    }
    let inputs = values.windows(window_len + 1).map(|w| w[..window_len].to_vec()).collect();
    let targets = values[window_len..].to_vec();
    Ok(WindowedDataset { inputs, targets, window_len })
}
