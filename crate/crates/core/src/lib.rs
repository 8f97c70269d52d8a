//! Weekly chickenpox forecasting for the Hungarian counties.
//!
//! The pipeline runs ingest → preprocess → model → bench. [`ingest`] parses the
//! case and population CSVs into a [`series::Dataset`]. [`preprocess`] splits each
//! series and applies one of two normalizations. [`classical`] and [`neural`]
//! fit and forecast. [`bench`] runs the full grid and writes reports. [`eda`]
//! summarizes a dataset, and [`synthetic`] builds a seeded stand-in for the
//! reference data.
//!
//! ```
//! use poxcast::bench::{fit_and_forecast, BenchConfig, Model};
//! use poxcast::ingest::attach_population;
//! use poxcast::preprocess::Method;
//! use poxcast::synthetic::surrogate_subset;
//!
//! let s = surrogate_subset(1, 260, &["BARANYA"]);
//! let pops = attach_population(&s.dataset, &s.population).unwrap();
//! let series = s.dataset.series("BARANYA").unwrap();
//! let cfg = BenchConfig::default();
//! let run = fit_and_forecast(&series, Some(&pops["BARANYA"]), Model::Arima, Method::PopulationPercent, &cfg, 1).unwrap();
//! assert_eq!(run.predictions_cases.len(), 52);
//! assert!(run.rmse_scaled.is_finite());
//! ```

pub mod bench;
pub mod classical;
pub mod eda;
pub mod ingest;
pub mod neural;
pub mod preprocess;
pub mod series;
pub mod synthetic;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/normalization.md")]
    mod normalization {}
    #[doc = include_str!("../../../book/src/eda.md")]
    mod eda {}
    #[doc = include_str!("../../../book/src/classical.md")]
    mod classical {}
    #[doc = include_str!("../../../book/src/neural.md")]
    mod neural {}
    #[doc = include_str!("../../../book/src/benchmark.md")]
    mod benchmark {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
