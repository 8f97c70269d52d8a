//! Exploratory summaries: per-county averages, per-capita ratios, classical
//! additive decomposition, and CSV exports of the figure data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::ingest::PopulationSeries;
use crate::series::{Dataset, TimeSeries, WeekDate};

#[derive(Debug, Error)]
pub enum EdaError {
    #[error("series of length {len} is shorter than two periods of {period}")]
    TooShort { len: usize, period: usize },
    #[error("period must be at least 2, got {0}")]
    Period(usize),
    #[error("no population for {county} on {date}")]
    MissingPopulation { county: String, date: WeekDate },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Arithmetic mean of each county's raw weekly counts.
pub fn mean_weekly_cases(dataset: &Dataset) -> BTreeMap<String, f64> {
    dataset.counties().map(|s| (s.id().to_string(), mean(s.values()))).collect()
}

/// Mean over weeks of `cases / population * 100` per county.
pub fn mean_per_capita(
    dataset: &Dataset,
    populations: &BTreeMap<String, PopulationSeries>,
) -> Result<BTreeMap<String, f64>, EdaError> {
    let mut out = BTreeMap::new();
    for s in dataset.counties() {
        let missing = |date| EdaError::MissingPopulation { county: s.id().to_string(), date };
        let pop = populations.get(s.id()).ok_or_else(|| missing(dataset.dates()[0]))?;
        let ratios = s
            .values()
            .iter()
            .zip(s.dates())
            .map(|(&x, &d)| pop.at(d).map(|p| x / p * 100.0).ok_or_else(|| missing(d)))
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(s.id().to_string(), mean(&ratios));
    }
    Ok(out)
}

/// Key with the largest value; ties go to the alphabetically first key.
pub fn argmax(map: &BTreeMap<String, f64>) -> Option<&str> {
    map.iter()
        .fold(None, |best: Option<(&String, f64)>, (k, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((k, v)),
        })
        .map(|(k, _)| k.as_str())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `observed = trend + seasonal + residual` wherever the trend is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub dates: Vec<WeekDate>,
    pub observed: Vec<f64>,
    /// Centered moving average; `None` on the first and last half-period.
    pub trend: Vec<Option<f64>>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<Option<f64>>,
    pub period: usize,
}

impl Decomposition {
    /// One full cycle of the seasonal component, indexed by phase `i % period`.
    pub fn seasonal_cycle(&self) -> &[f64] {
        &self.seasonal[..self.period]
    }

    /// Least-squares slope of the defined trend values against their index.
    pub fn trend_slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> =
            self.trend.iter().enumerate().filter_map(|(i, t)| t.map(|t| (i as f64, t))).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }

    /// ISO week of the first date at which the seasonal component peaks.
    pub fn seasonal_peak_week(&self) -> u32 {
        self.dates[argmax_index(self.seasonal_cycle())].iso_week()
    }

    /// ISO week of the first date at which the seasonal component bottoms out.
    pub fn seasonal_trough_week(&self) -> u32 {
        let neg: Vec<f64> = self.seasonal_cycle().iter().map(|v| -v).collect();
        self.dates[argmax_index(&neg)].iso_week()
    }
}

fn argmax_index(xs: &[f64]) -> usize {
    xs.iter().enumerate().fold(0, |best, (i, &v)| if v > xs[best] { i } else { best })
}

/// Classical additive decomposition with a centered moving-average trend.
///
/// For an even period the trend is the 2×`period` moving average (half
/// weights on the two outermost points), so `period / 2` points are masked at
/// each end. Seasonal indices are per-phase means of the detrended values,
/// shifted to sum to zero over one cycle.
pub fn decompose_additive(series: &TimeSeries, period: usize) -> Result<Decomposition, EdaError> {
    if period < 2 {
        return Err(EdaError::Period(period));
    }
    let x = series.values();
    let n = x.len();
    if n < 2 * period {
        return Err(EdaError::TooShort { len: n, period });
    }
    let half = period / 2;
    let mut trend = vec![None; n];
    for (i, slot) in trend.iter_mut().enumerate().take(n - half).skip(half) {
        let t = if period.is_multiple_of(2) {
            let inner: f64 = x[i + 1 - half..i + half].iter().sum();
            (0.5 * x[i - half] + inner + 0.5 * x[i + half]) / period as f64
        } else {
            x[i - half..=i + half].iter().sum::<f64>() / period as f64
        };
        *slot = Some(t);
    }

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for i in 0..n {
        if let Some(t) = trend[i] {
            sums[i % period] += x[i] - t;
            counts[i % period] += 1;
        }
    }
    let phase_means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let centre = mean(&phase_means);
    let cycle: Vec<f64> = phase_means.iter().map(|m| m - centre).collect();
    let seasonal: Vec<f64> = (0..n).map(|i| cycle[i % period]).collect();
    let residual = (0..n).map(|i| trend[i].map(|t| x[i] - t - seasonal[i])).collect();

    Ok(Decomposition {
        dates: series.dates().to_vec(),
        observed: x.to_vec(),
        trend,
        seasonal,
        residual,
        period,
    })
}

/// Tabular data behind one exploratory figure.
#[derive(Debug, Clone)]
pub enum FigureData<'a> {
    /// `county,mean_cases,mean_per_capita_percent`
    Averages { means: &'a BTreeMap<String, f64>, per_capita: &'a BTreeMap<String, f64>, order: &'a [&'a str] },
    /// `date,observed,trend,seasonal,residual`; masked cells are empty.
    Decomposition(&'a Decomposition),
    /// `date,<SERIES>...` in the given order.
    Series(&'a [TimeSeries]),
}

impl FigureData<'_> {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        match self {
            FigureData::Averages { means, per_capita, order } => {
                out.push_str("county,mean_cases,mean_per_capita_percent\n");
                for c in order.iter() {
                    let _ = writeln!(
                        out,
                        "{c},{},{}",
                        opt(means.get(*c).copied()),
                        opt(per_capita.get(*c).copied())
                    );
                }
            }
            FigureData::Decomposition(d) => {
                out.push_str("date,observed,trend,seasonal,residual\n");
                for i in 0..d.observed.len() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        d.dates[i],
                        d.observed[i],
                        opt(d.trend[i]),
                        d.seasonal[i],
                        opt(d.residual[i])
                    );
                }
            }
            FigureData::Series(series) => {
                out.push_str("date");
                for s in series.iter() {
                    out.push(',');
                    out.push_str(s.id());
                }
                out.push('\n');
                if let Some(first) = series.first() {
                    for (i, d) in first.dates().iter().enumerate() {
                        out.push_str(&d.to_string());
                        for s in series.iter() {
                            let _ = write!(out, ",{}", s.values()[i]);
                        }
                        out.push('\n');
                    }
                }
            }
        }
        out
    }
}

/// Writes the figure data as CSV to `path`.
pub fn emit_figure_data(what: &FigureData<'_>, path: &Path) -> Result<(), EdaError> {
    std::fs::write(path, what.to_csv())?;
    Ok(())
}
