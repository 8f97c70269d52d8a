//! Seeded stand-in for the weekly county case counts.
//!
//! The generator matches the reference files in shape and format only:
//! 20 counties, Monday-dated weeks from 2005-01-03, winter peaks, a slow
//! decline over the years, and a yearly population table. Counts are drawn
//! from a Poisson law around a seasonal mean, so nothing here carries real
//! epidemiological information.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::ingest::{parse_cases_csv, parse_population_csv, PopulationTable};
use crate::series::{Dataset, TimeSeries, WeekDate, COUNTIES};

pub const SURROGATE_WEEKS: usize = 522;

/// Approximate residents (thousands) and relative incidence per county,
/// in [`COUNTIES`] order.
const PROFILE: [(f64, f64); 20] = [
    (1729.0, 1.10),
    (386.0, 1.05),
    (520.0, 0.95),
    (360.0, 0.90),
    (686.0, 0.85),
    (417.0, 1.00),
    (426.0, 1.15),
    (448.0, 1.20),
    (547.0, 0.90),
    (308.0, 1.05),
    (386.0, 0.85),
    (304.0, 1.10),
    (201.0, 0.95),
    (1218.0, 1.00),
    (317.0, 1.00),
    (559.0, 0.80),
    (230.0, 1.05),
    (257.0, 1.25),
    (353.0, 1.60),
    (282.0, 1.10),
];

pub fn surrogate_start() -> WeekDate {
    WeekDate::from_ymd(2005, 1, 3).expect("valid date")
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    pub dataset: Dataset,
    pub population: PopulationTable,
    pub cases_csv: String,
    pub population_csv: String,
    /// Poisson mean behind every count, per county in [`COUNTIES`] order.
    pub means: Vec<Vec<f64>>,
}

fn seasonal_shape(week: u32, peak: f64) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * (week as f64 - peak) / 52.0;
    let bump = 0.5 * (1.0 + phase.cos());
    0.25 + 1.75 * bump * bump
}

/// Builds the cases and population files for `weeks` weeks and parses them
/// back, so the result went through the same ingestion path as real data.
pub fn surrogate(seed: u64, weeks: usize) -> Surrogate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dates = surrogate_start().weeks_from(weeks);
    let years = weeks.div_ceil(52) + 1;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(COUNTIES.len());
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(COUNTIES.len());
    for &(thousands, rate) in &PROFILE {
        let base = 0.06 * thousands * rate;
        let peak = 3.0 + rng.random_range(-1.5..1.5);
        let yearly: Vec<f64> = (0..years).map(|_| rng.random_range(0.75..1.3)).collect();
        let mean: Vec<f64> = dates
            .iter()
            .enumerate()
            .map(|(t, d)| base * (-0.06 * t as f64 / 52.0).exp() * yearly[t / 52] * seasonal_shape(d.iso_week(), peak))
            .collect();
        columns.push(mean.iter().map(|&m| Poisson::new(m).expect("positive mean").sample(&mut rng).round()).collect());
        means.push(mean);
    }

    let mut cases_csv = String::from("Date");
    for c in COUNTIES {
        cases_csv.push(',');
        cases_csv.push_str(c);
    }
    cases_csv.push('\n');
    for (t, d) in dates.iter().enumerate() {
        cases_csv.push_str(&d.date().format("%d/%m/%Y").to_string());
        for col in &columns {
            cases_csv.push_str(&format!(",{}", col[t]));
        }
        cases_csv.push('\n');
    }

    let first_year = surrogate_start().year();
    let mut population_csv = String::from("county,year,population\n");
    for (c, &(thousands, _)) in COUNTIES.iter().zip(&PROFILE) {
        for k in 0..=years as i32 {
            let pop = (thousands * 1000.0 * (1.0 - 0.003 * k as f64)).round();
            population_csv.push_str(&format!("{c},{},{pop}\n", first_year + k));
        }
    }

    let dataset = parse_cases_csv(cases_csv.as_bytes()).expect("generated cases parse");
    let population = parse_population_csv(population_csv.as_bytes()).expect("generated population parses");
    Surrogate { dataset, population, cases_csv, population_csv, means }
}

/// A small dataset holding only `counties`, for quick pipeline runs.
pub fn surrogate_subset(seed: u64, weeks: usize, counties: &[&str]) -> Surrogate {
    let full = surrogate(seed, weeks);
    let series: Vec<TimeSeries> =
        counties.iter().map(|c| full.dataset.county(c).expect("known county").clone()).collect();
    Surrogate { dataset: Dataset::new(series).expect("consistent subset"), ..full }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eda::{argmax, decompose_additive, mean_per_capita, mean_weekly_cases};
    use crate::ingest::attach_population;

    #[test]
    fn shape_and_determinism() {
        let a = surrogate(1, SURROGATE_WEEKS);
        assert_eq!(a.dataset.len(), SURROGATE_WEEKS);
        assert_eq!(a.dataset.counties().count(), 20);
        assert_eq!(a.dataset.dates()[0], surrogate_start());
        assert_eq!(a.cases_csv, surrogate(1, SURROGATE_WEEKS).cases_csv);
        assert_ne!(a.cases_csv, surrogate(2, SURROGATE_WEEKS).cases_csv);
        assert!(a.dataset.counties().all(|s| s.values().iter().all(|v| *v >= 0.0 && v.fract() == 0.0)));
    }

    #[test]
    fn qualitative_profile() {
        let s = surrogate(7, SURROGATE_WEEKS);
        let pops = attach_population(&s.dataset, &s.population).unwrap();
        assert_eq!(argmax(&mean_weekly_cases(&s.dataset)), Some("BUDAPEST"));
        assert_eq!(argmax(&mean_per_capita(&s.dataset, &pops).unwrap()), Some("VESZPREM"));
        let d = decompose_additive(&s.dataset.aggregate_country(), 52).unwrap();
        assert!(d.trend_slope() < 0.0);
        let peak = d.seasonal_peak_week();
        assert!(peak >= 48 || peak <= 9, "peak week {peak}");
    }
}
