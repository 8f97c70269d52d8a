use serde::{Deserialize, Serialize};

use crate::series::WeekDate;

/// Exogenous regressors of a SARIMAX model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExogSpec {
    None,
    /// `sin`/`cos` pairs of the week of year for harmonics `1..=harmonics`.
    FourierWeekOfYear { harmonics: usize },
}

impl ExogSpec {
    pub fn columns(&self) -> usize {
        match self {
            ExogSpec::None => 0,
            ExogSpec::FourierWeekOfYear { harmonics } => 2 * harmonics,
        }
    }

    /// One row per date; rows are empty for [`ExogSpec::None`].
    pub fn matrix(&self, dates: &[WeekDate]) -> Vec<Vec<f64>> {
        match self {
            ExogSpec::None => vec![Vec::new(); dates.len()],
            ExogSpec::FourierWeekOfYear { harmonics } => fourier_exog(dates, *harmonics),
        }
    }
}

/// ISO week number used as the Fourier phase.
pub fn week_of_year(date: WeekDate) -> u32 {
    date.iso_week()
}

/// Row `k`-th pair: `sin(2πk·w/52), cos(2πk·w/52)` for `k = 1..=harmonics`.
pub fn fourier_row(week: u32, harmonics: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * harmonics);
    for k in 1..=harmonics {
        let angle = 2.0 * std::f64::consts::PI * k as f64 * week as f64 / 52.0;
        row.push(angle.sin());
        row.push(angle.cos());
    }
    row
}

pub fn fourier_exog(dates: &[WeekDate], harmonics: usize) -> Vec<Vec<f64>> {
    dates.iter().map(|&d| fourier_row(week_of_year(d), harmonics)).collect()
}
