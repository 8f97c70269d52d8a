//! Benchmark matrix, error metric and improvement analysis.

mod published;
mod report;
mod run;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::preprocess::Method;
use crate::series::{county_rank, COUNTRY};

pub use published::{published_rows, published_table, PublishedRow, PUBLISHED_MEAN_IMPROVEMENT};
pub use report::{emit_results, improvements_csv, read_results_csv, render_markdown, results_csv, results_json, Format};
pub use run::{cell_seed, fit_and_forecast, run_benchmark, run_benchmark_with, BenchConfig, CellError, CellRun, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("predictions ({predictions}) and observations ({observations}) differ in length")]
    Length { predictions: usize, observations: usize },
    #[error("cannot compute an error over zero points")]
    Empty,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("method 1 loss must be positive, got {0}")]
    NonPositiveLoss(f64),
    #[error("series {series}: no {method} cell for {model}")]
    MissingCounterpart { series: String, model: Model, method: Method },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("results row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("series `{0}` not found")]
    UnknownSeries(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The seven forecasters, in the column order of the results table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Model {
    Sarimax,
    Arima,
    Sarima,
    Lstm,
    Gru,
    Nbeats,
    Deepar,
}

impl Model {
    pub const ALL: [Model; 7] =
        [Model::Sarimax, Model::Arima, Model::Sarima, Model::Lstm, Model::Gru, Model::Nbeats, Model::Deepar];

    pub fn label(self) -> &'static str {
        match self {
            Model::Sarimax => "SARIMAX",
            Model::Arima => "ARIMA",
            Model::Sarima => "SARIMA",
            Model::Lstm => "LSTM",
            Model::Gru => "GRU",
            Model::Nbeats => "NBEATS",
            Model::Deepar => "DEEPAR",
        }
    }

    /// Case-insensitive; dashes and underscores are ignored (`n-beats`).
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_uppercase();
        Model::ALL.into_iter().find(|m| m.label() == key).ok_or_else(|| BenchError::UnknownModel(s.to_string()))
    }

    pub fn is_classical(self) -> bool {
        matches!(self, Model::Sarimax | Model::Arima | Model::Sarima)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Sort key placing counties in file order and the country last.
pub fn series_rank(id: &str) -> (usize, String) {
    match county_rank(id) {
        Some(r) => (r, String::new()),
        None if id == COUNTRY => (usize::MAX - 1, String::new()),
        None => (usize::MAX, id.to_string()),
    }
}

/// Root mean square error.
pub fn rmse(predictions: &[f64], observations: &[f64]) -> Result<f64, BenchError> {
    if predictions.len() != observations.len() {
        return Err(BenchError::Length { predictions: predictions.len(), observations: observations.len() });
    }
    if predictions.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut sum = 0.0;
    for (i, (p, o)) in predictions.iter().zip(observations).enumerate() {
        if !p.is_finite() || !o.is_finite() {
            return Err(BenchError::NonFinite(i));
        }
        sum += (p - o) * (p - o);
    }
    Ok((sum / predictions.len() as f64).sqrt())
}

/// Relative reduction of `loss2` against `loss1`, in percent.
pub fn improvement_percent(loss1: f64, loss2: f64) -> Result<f64, BenchError> {
    if !(loss1 > 0.0) {
        return Err(BenchError::NonPositiveLoss(loss1));
    }
    Ok((loss1 - loss2) / loss1 * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub series: String,
    pub model: Model,
    pub method: Method,
    pub rmse_scaled: Option<f64>,
    pub rmse_cases: Option<f64>,
    pub seed: u64,
    pub wall_ms: Option<u64>,
    pub n_params: usize,
    pub error: Option<String>,
}

impl BenchmarkCell {
    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.rmse_scaled.is_some()
    }

    fn key(&self) -> ((usize, String), Model, Method) {
        (series_rank(&self.series), self.model, self.method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub cells: Vec<BenchmarkCell>,
    /// Best Method 2 model per series.
    pub best_per_series: BTreeMap<String, (Model, Method)>,
}

impl ResultsTable {
    /// Sorts the cells canonically and derives the best model per series.
    pub fn new(mut cells: Vec<BenchmarkCell>) -> Self {
        cells.sort_by(|a, b| a.key().cmp(&b.key()));
        let best_per_series = best_per_series(&cells);
        Self { cells, best_per_series }
    }

    pub fn cell(&self, series: &str, model: Model, method: Method) -> Option<&BenchmarkCell> {
        self.cells.iter().find(|c| c.series == series && c.model == model && c.method == method)
    }

    /// Series ids in canonical order.
    pub fn series(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.cells {
            if out.last() != Some(&c.series.as_str()) {
                out.push(&c.series);
            }
        }
        out
    }

    pub fn models(&self) -> Vec<Model> {
        let mut m: Vec<Model> = self.cells.iter().map(|c| c.model).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn error_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_ok()).count()
    }
}

/// Lower loss, then fewer parameters, then model label.
fn compare_best(a: &BenchmarkCell, b: &BenchmarkCell) -> Ordering {
    let (la, lb) = (a.rmse_scaled.unwrap_or(f64::INFINITY), b.rmse_scaled.unwrap_or(f64::INFINITY));
    la.total_cmp(&lb).then(a.n_params.cmp(&b.n_params)).then(a.model.label().cmp(b.model.label()))
}

/// Argmin of `rmse_scaled` over completed Method 2 cells of each series.
pub fn best_per_series(cells: &[BenchmarkCell]) -> BTreeMap<String, (Model, Method)> {
    let mut best: BTreeMap<String, &BenchmarkCell> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.method == Method::PopulationPercent && c.is_ok()) {
        match best.get(&c.series) {
            Some(b) if compare_best(c, b) != Ordering::Less => {}
            _ => {
                best.insert(c.series.clone(), c);
            }
        }
    }
    best.into_iter().map(|(s, c)| (s, (c.model, c.method))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub series: String,
    pub best_model: Model,
    pub loss1: f64,
    pub loss2: f64,
    pub improvement_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementAnalysis {
    pub rows: Vec<Improvement>,
    pub mean: f64,
}

impl ImprovementAnalysis {
    pub fn max(&self) -> Option<&Improvement> {
        self.rows.iter().max_by(|a, b| a.improvement_percent.total_cmp(&b.improvement_percent))
    }

    pub fn min(&self) -> Option<&Improvement> {
        self.rows.iter().min_by(|a, b| a.improvement_percent.total_cmp(&b.improvement_percent))
    }
}

/// Method 1 → Method 2 improvement of each series' best model.
pub fn analyze_improvements(table: &ResultsTable) -> Result<ImprovementAnalysis, BenchError> {
    let mut rows = Vec::new();
    for series in table.series() {
        let Some(&(model, _)) = table.best_per_series.get(series) else { continue };
        let loss = |method| {
            table
                .cell(series, model, method)
                .filter(|c| c.is_ok())
                .and_then(|c| c.rmse_scaled)
                .ok_or(BenchError::MissingCounterpart { series: series.to_string(), model, method })
        };
        let (loss1, loss2) = (loss(Method::MinMax)?, loss(Method::PopulationPercent)?);
        rows.push(Improvement {
            series: series.to_string(),
            best_model: model,
            loss1,
            loss2,
            improvement_percent: improvement_percent(loss1, loss2)?,
        });
    }
    let mean = if rows.is_empty() { 0.0 } else { rows.iter().map(|r| r.improvement_percent).sum::<f64>() / rows.len() as f64 };
    Ok(ImprovementAnalysis { rows, mean })
}

/// Among classical (series, model) pairs with both methods completed, how
/// many have Method 2 `rmse_cases` at or below Method 1's.
pub fn method2_benefit(table: &ResultsTable) -> (usize, usize) {
    let mut wins = 0;
    let mut total = 0;
    for c2 in table.cells.iter().filter(|c| c.model.is_classical() && c.method == Method::PopulationPercent) {
        let Some(c1) = table.cell(&c2.series, c2.model, Method::MinMax) else { continue };
        if let (Some(a), Some(b), true, true) = (c1.rmse_cases, c2.rmse_cases, c1.is_ok(), c2.is_ok()) {
            total += 1;
            if b <= a {
                wins += 1;
            }
        }
    }
    (wins, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cell(series: &str, model: Model, method: Method, loss: f64, n_params: usize) -> BenchmarkCell {
        BenchmarkCell {
            series: series.into(),
            model,
            method,
            rmse_scaled: Some(loss),
            rmse_cases: Some(loss * 100.0),
            seed: 0,
            wall_ms: None,
            n_params,
            error: None,
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((rmse(&[1.5, -2.0, 7.0], &[3.75, 0.25, 9.25]).unwrap() - 2.25).abs() < 1e-15);
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(BenchError::Length { .. })));
        assert!(matches!(rmse(&[], &[]), Err(BenchError::Empty)));
        assert!(matches!(rmse(&[1.0, f64::NAN], &[1.0, 2.0]), Err(BenchError::NonFinite(1))));
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(format!("{:.2}", improvement_percent(0.09, 0.02).unwrap()), "77.78");
        assert_eq!(format!("{:.2}", improvement_percent(0.07, 0.06).unwrap()), "14.29");
        assert_eq!(improvement_percent(0.3, 0.3).unwrap(), 0.0);
        assert!(matches!(improvement_percent(0.0, 0.1), Err(BenchError::NonPositiveLoss(_))));
        assert!(improvement_percent(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn model_parsing() {
        assert_eq!(Model::parse("lstm").unwrap(), Model::Lstm);
        assert_eq!(Model::parse("N-BEATS").unwrap(), Model::Nbeats);
        assert_eq!(Model::parse("DeepAR").unwrap(), Model::Deepar);
        assert!(Model::parse("tft").is_err());
        for m in Model::ALL {
            assert_eq!(Model::parse(m.label()).unwrap(), m);
        }
    }

    #[test]
    fn best_uses_tie_breaks_and_skips_errors() {
        let mut failed = cell("VAS", Model::Arima, Method::PopulationPercent, 0.0, 1);
        failed.error = Some("boom".into());
        failed.rmse_scaled = None;
        let t = ResultsTable::new(vec![
            cell("VAS", Model::Lstm, Method::PopulationPercent, 0.05, 100),
            cell("VAS", Model::Gru, Method::PopulationPercent, 0.05, 80),
            cell("VAS", Model::Sarima, Method::MinMax, 0.01, 3),
            failed,
            cell("ZALA", Model::Lstm, Method::PopulationPercent, 0.05, 10),
            cell("ZALA", Model::Gru, Method::PopulationPercent, 0.05, 10),
        ]);
        assert_eq!(t.best_per_series["VAS"], (Model::Gru, Method::PopulationPercent));
        assert_eq!(t.best_per_series["ZALA"], (Model::Gru, Method::PopulationPercent));
        assert_eq!(t.error_count(), 1);
    }

    #[test]
    fn canonical_order() {
        let t = ResultsTable::new(vec![
            cell(COUNTRY, Model::Arima, Method::MinMax, 0.1, 1),
            cell("ZALA", Model::Arima, Method::MinMax, 0.1, 1),
            cell("BUDAPEST", Model::Gru, Method::PopulationPercent, 0.1, 1),
            cell("BUDAPEST", Model::Gru, Method::MinMax, 0.1, 1),
            cell("BUDAPEST", Model::Sarimax, Method::MinMax, 0.1, 1),
        ]);
        let keys: Vec<(&str, Model, Method)> = t.cells.iter().map(|c| (c.series.as_str(), c.model, c.method)).collect();
        assert_eq!(
            keys,
            vec![
                ("BUDAPEST", Model::Sarimax, Method::MinMax),
                ("BUDAPEST", Model::Gru, Method::MinMax),
                ("BUDAPEST", Model::Gru, Method::PopulationPercent),
                ("ZALA", Model::Arima, Method::MinMax),
                (COUNTRY, Model::Arima, Method::MinMax),
            ]
        );
        assert_eq!(t.series(), vec!["BUDAPEST", "ZALA", COUNTRY]);
    }

    #[test]
    fn equal_losses_give_zero_improvement() {
        let mut cells = Vec::new();
        for s in ["BACS", "PEST"] {
            for m in [Model::Arima, Model::Lstm] {
                for method in Method::ALL {
                    cells.push(cell(s, m, method, 0.2, 1));
                }
            }
        }
        let a = analyze_improvements(&ResultsTable::new(cells)).unwrap();
        assert_eq!(a.rows.len(), 2);
        assert!(a.rows.iter().all(|r| r.improvement_percent == 0.0));
        assert_eq!(a.mean, 0.0);
    }

    #[test]
    fn missing_counterpart_is_an_error() {
        let t = ResultsTable::new(vec![cell("VAS", Model::Lstm, Method::PopulationPercent, 0.06, 1)]);
        assert!(matches!(analyze_improvements(&t), Err(BenchError::MissingCounterpart { .. })));
    }

    #[test]
    fn method2_benefit_counts_classical_pairs() {
        let t = ResultsTable::new(vec![
            cell("VAS", Model::Arima, Method::MinMax, 0.3, 1),
            cell("VAS", Model::Arima, Method::PopulationPercent, 0.2, 1),
            cell("VAS", Model::Sarima, Method::MinMax, 0.1, 1),
            cell("VAS", Model::Sarima, Method::PopulationPercent, 0.2, 1),
            cell("VAS", Model::Lstm, Method::MinMax, 0.3, 1),
            cell("VAS", Model::Lstm, Method::PopulationPercent, 0.2, 1),
        ]);
        assert_eq!(method2_benefit(&t), (1, 2));
    }

    fn oracle(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (a[i] - b[i]).powi(2);
        }
        (s / a.len() as f64).sqrt()
    }

    proptest! {
        #[test]
        fn rmse_properties(seed in 0u64..10_000, n in 1usize..60, c in -50.0f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || (0..n).map(|_| rng.random_range(-100.0..100.0)).collect::<Vec<f64>>();
            let (a, b, d) = (draw(), draw(), draw());
            let ab = rmse(&a, &b).unwrap();
            prop_assert!((ab - oracle(&a, &b)).abs() < 1e-12);
            prop_assert_eq!(ab, rmse(&b, &a).unwrap());
            prop_assert!(rmse(&a, &d).unwrap() <= ab + rmse(&b, &d).unwrap() + 1e-9);
            let ca: Vec<f64> = a.iter().map(|x| c * x).collect();
            let cb: Vec<f64> = b.iter().map(|x| c * x).collect();
            prop_assert!((rmse(&ca, &cb).unwrap() - c.abs() * ab).abs() < 1e-9 * (1.0 + ab * c.abs()));
            let shifted: Vec<f64> = a.iter().map(|x| x + c).collect();
            prop_assert!((rmse(&shifted, &a).unwrap() - c.abs()).abs() < 1e-9);
        }

        #[test]
        fn improvement_scale_invariant(l1 in 0.001f64..10.0, l2 in 0.0f64..10.0, k in 0.01f64..100.0) {
            let base = improvement_percent(l1, l2).unwrap();
            prop_assert!((improvement_percent(k * l1, k * l2).unwrap() - base).abs() < 1e-9 * (1.0 + base.abs()));
        }

        #[test]
        fn best_invariant_under_monotone_maps(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cells: Vec<BenchmarkCell> = Model::ALL
                .iter()
                .map(|&m| cell("VAS", m, Method::PopulationPercent, rng.random_range(0.0..1.0), rng.random_range(1..5)))
                .collect();
            let mapped: Vec<BenchmarkCell> = cells
                .iter()
                .map(|c| BenchmarkCell { rmse_scaled: c.rmse_scaled.map(|v| (3.0 * v).exp() + 2.0), ..c.clone() })
                .collect();
            prop_assert_eq!(best_per_series(&cells), best_per_series(&mapped));
        }
    }
}
