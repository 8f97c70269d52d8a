use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::{rmse, BenchError, BenchmarkCell, Model, ResultsTable};
use crate::classical::{default_grid, forecast_series, select_order, ArimaError, ArimaModel, ExogSpec, FitConfig};
use crate::ingest::PopulationSeries;
use crate::neural::{rolling_forecast_neural, train, NeuralConfig, NeuralError, TrainedForecaster};
use crate::preprocess::{denormalize, make_windows, normalize, split_train_test, Method, PreprocessError};
use crate::series::{Dataset, TimeSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub models: Vec<Model>,
    pub methods: Vec<Method>,
    /// Restrict to these series ids; `None` runs every county and the country.
    pub series: Option<Vec<String>>,
    pub ratio: f64,
    pub period: usize,
    /// Fourier pairs used as SARIMAX regressors.
    pub harmonics: usize,
    pub fit: FitConfig,
    pub neural: NeuralConfig,
    pub jobs: usize,
    /// Fill `wall_ms`. Off by default since timings differ run to run.
    pub record_timings: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            models: Model::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            series: None,
            ratio: 0.8,
            period: 52,
            harmonics: 2,
            fit: FitConfig::default(),
            neural: NeuralConfig::default(),
            jobs: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            record_timings: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CellError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Arima(#[from] ArimaError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Metric(#[from] BenchError),
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Classical(ArimaModel),
    Neural(TrainedForecaster),
}

impl TrainedModel {
    pub fn n_params(&self) -> usize {
        match self {
            TrainedModel::Classical(m) => m.n_params(),
            TrainedModel::Neural(m) => m.param_count(),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            TrainedModel::Classical(m) => m.to_json(),
            TrainedModel::Neural(m) => m.to_json(),
        }
    }
}

/// Everything one (series, model, method) run produces.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub model: TrainedModel,
    pub test: TimeSeries,
    pub predictions_scaled: Vec<f64>,
    pub predictions_cases: Vec<f64>,
    pub rmse_scaled: f64,
    pub rmse_cases: f64,
}

/// FNV-1a over the master seed and the cell coordinates.
pub fn cell_seed(seed: u64, series: &str, model: Model, method: Method) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&seed.to_le_bytes());
    for part in [series, model.label(), method.label()] {
        eat(part.as_bytes());
        eat(&[0]);
    }
    h
}

/// Split, normalize, fit on the training part, forecast the test part one
/// step at a time and score in both spaces.
pub fn fit_and_forecast(
    series: &TimeSeries,
    population: Option<&PopulationSeries>,
    model: Model,
    method: Method,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<CellRun, CellError> {
    let split = split_train_test(series, cfg.ratio)?;
    let norm = normalize(&split, method, population)?;
    let (trained, predictions_scaled) = if model.is_classical() {
        let (seasonal, exog) = match model {
            Model::Arima => (false, ExogSpec::None),
            Model::Sarima => (true, ExogSpec::None),
            _ => (true, ExogSpec::FourierWeekOfYear { harmonics: cfg.harmonics }),
        };
        let grid = default_grid(seasonal, cfg.period);
        let selection = select_order(&norm.train, &grid, exog, &cfg.fit)?;
        let preds = forecast_series(&selection.model, &norm.test)?;
        (TrainedModel::Classical(selection.model), preds)
    } else {
        let kind = match model {
            Model::Lstm => crate::neural::ModelKind::Lstm,
            Model::Gru => crate::neural::ModelKind::Gru,
            Model::Nbeats => crate::neural::ModelKind::NBeats,
            _ => crate::neural::ModelKind::DeepAr,
        };
        let neural = NeuralConfig { seed, ..cfg.neural };
        let windows = make_windows(norm.train.values(), neural.window)?;
        let m = train(kind, &windows, &neural)?;
        let preds = rolling_forecast_neural(&m, norm.train.values(), norm.test.values())?;
        (TrainedModel::Neural(m), preds)
    };
    let rmse_scaled = rmse(&predictions_scaled, norm.test.values())?;
    let predictions_cases = denormalize(&predictions_scaled, split.test.dates(), &norm.params)?;
    let rmse_cases = rmse(&predictions_cases, split.test.values())?;
    Ok(CellRun { model: trained, test: split.test, predictions_scaled, predictions_cases, rmse_scaled, rmse_cases })
}

/// Runs every selected (series, model, method) cell on a pool of
/// `cfg.jobs` threads. Failed cells keep their error message.
pub fn run_benchmark(
    dataset: &Dataset,
    populations: &BTreeMap<String, PopulationSeries>,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<ResultsTable, BenchError> {
    run_benchmark_with(dataset, populations, cfg, seed, &|_| {})
}

/// [`run_benchmark`] calling `on_cell` as each cell finishes.
pub fn run_benchmark_with(
    dataset: &Dataset,
    populations: &BTreeMap<String, PopulationSeries>,
    cfg: &BenchConfig,
    seed: u64,
    on_cell: &(dyn Fn(&BenchmarkCell) + Sync),
) -> Result<ResultsTable, BenchError> {
    let all = dataset.all_series();
    let series: Vec<TimeSeries> = match &cfg.series {
        None => all,
        Some(ids) => ids
            .iter()
            .map(|id| all.iter().find(|s| s.id() == id).cloned().ok_or_else(|| BenchError::UnknownSeries(id.clone())))
            .collect::<Result<_, _>>()?,
    };
    let mut tasks: Vec<(&TimeSeries, Model, Method)> = Vec::new();
    for s in &series {
        for &m in &cfg.models {
            for &method in &cfg.methods {
                tasks.push((s, m, method));
            }
        }
    }
    // the slow neural cells go first so the pool does not idle at the end
    tasks.sort_by_key(|&(_, m, _)| m.is_classical());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| BenchError::Io(std::io::Error::other(e)))?;
    let cells: Vec<BenchmarkCell> = pool.install(|| {
        tasks
            .par_iter()
            .with_max_len(1)
            .map(|&(s, model, method)| {
                let seed = cell_seed(seed, s.id(), model, method);
                let start = Instant::now();
                let outcome = fit_and_forecast(s, populations.get(s.id()), model, method, cfg, seed);
                let wall_ms = cfg.record_timings.then(|| start.elapsed().as_millis() as u64);
                let cell = match outcome {
                    Ok(run) => BenchmarkCell {
                        series: s.id().to_string(),
                        model,
                        method,
                        rmse_scaled: Some(run.rmse_scaled),
                        rmse_cases: Some(run.rmse_cases),
                        seed,
                        wall_ms,
                        n_params: run.model.n_params(),
                        error: None,
                    },
                    Err(e) => BenchmarkCell {
                        series: s.id().to_string(),
                        model,
                        method,
                        rmse_scaled: None,
                        rmse_cases: None,
                        seed,
                        wall_ms,
                        n_params: 0,
                        error: Some(e.to_string()),
                    },
                };
                on_cell(&cell);
                cell
            })
            .collect()
    });
    Ok(ResultsTable::new(cells))
}
