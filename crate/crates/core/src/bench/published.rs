//! Losses from the published benchmark table, used to check the
//! improvement arithmetic against the published figures.

use super::{BenchmarkCell, Model, ResultsTable};
use crate::preprocess::Method;

/// Mean improvement quoted alongside the published table, in percent.
pub const PUBLISHED_MEAN_IMPROVEMENT: f64 = 51.39;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub series: &'static str,
    /// Model label as printed; includes `TFT`, which has no counterpart here.
    pub model: &'static str,
    pub loss1: f64,
    pub loss2: f64,
}

const MODELS: [&str; 8] = ["SARIMAX", "ARIMA", "SARIMA", "LSTM", "GRU", "NBEATS", "DEEPAR", "TFT"];

#[rustfmt::skip]
const LOSSES: [(&str, [(f64, f64); 8]); 21] = [
    ("BUDAPEST", [(0.11, 0.04), (0.35, 0.21), (0.24, 0.14), (0.09, 0.03), (0.13, 0.07), (0.30, 0.20), (0.17, 0.09), (0.34, 0.11)]),
    ("BARANYA",  [(0.12, 0.04), (0.33, 0.18), (0.28, 0.15), (0.08, 0.03), (0.12, 0.06), (0.22, 0.05), (0.15, 0.05), (0.23, 0.09)]),
    ("BACS",     [(0.12, 0.07), (0.35, 0.21), (0.22, 0.12), (0.09, 0.04), (0.12, 0.08), (0.30, 0.05), (0.14, 0.08), (0.22, 0.12)]),
    ("BEKES",    [(0.13, 0.05), (0.35, 0.20), (0.19, 0.11), (0.07, 0.03), (0.10, 0.08), (0.25, 0.04), (0.16, 0.09), (0.22, 0.06)]),
    ("BORSOD",   [(0.12, 0.08), (0.27, 0.13), (0.15, 0.11), (0.08, 0.05), (0.09, 0.06), (0.20, 0.07), (0.18, 0.08), (0.32, 0.08)]),
    ("CSONGRAD", [(0.13, 0.07), (0.34, 0.21), (0.19, 0.11), (0.09, 0.04), (0.09, 0.07), (0.32, 0.08), (0.14, 0.07), (0.25, 0.09)]),
    ("FEJER",    [(0.11, 0.06), (0.35, 0.21), (0.24, 0.14), (0.09, 0.06), (0.07, 0.04), (0.23, 0.06), (0.15, 0.08), (0.25, 0.12)]),
    ("GYOR",     [(0.12, 0.05), (0.33, 0.18), (0.28, 0.15), (0.07, 0.04), (0.07, 0.03), (0.30, 0.04), (0.18, 0.07), (0.26, 0.09)]),
    ("HAJDU",    [(0.12, 0.07), (0.34, 0.21), (0.19, 0.11), (0.08, 0.03), (0.12, 0.08), (0.23, 0.06), (0.15, 0.07), (0.24, 0.12)]),
    ("HEVES",    [(0.12, 0.05), (0.36, 0.18), (0.26, 0.12), (0.09, 0.04), (0.12, 0.07), (0.11, 0.05), (0.13, 0.06), (0.22, 0.11)]),
    ("JASZ",     [(0.10, 0.04), (0.35, 0.22), (0.24, 0.11), (0.08, 0.03), (0.09, 0.05), (0.22, 0.06), (0.14, 0.07), (0.33, 0.13)]),
    ("KOMAROM",  [(0.11, 0.06), (0.33, 0.13), (0.21, 0.12), (0.07, 0.05), (0.11, 0.08), (0.33, 0.07), (0.16, 0.07), (0.34, 0.09)]),
    ("NOGRAD",   [(0.12, 0.06), (0.33, 0.18), (0.28, 0.15), (0.08, 0.03), (0.09, 0.02), (0.24, 0.04), (0.14, 0.07), (0.24, 0.11)]),
    ("PEST",     [(0.13, 0.05), (0.33, 0.13), (0.21, 0.12), (0.08, 0.04), (0.11, 0.06), (0.33, 0.05), (0.14, 0.07), (0.23, 0.11)]),
    ("SOMOGY",   [(0.12, 0.04), (0.36, 0.18), (0.26, 0.12), (0.06, 0.03), (0.12, 0.07), (0.32, 0.06), (0.13, 0.06), (0.26, 0.12)]),
    ("SZABOLCS", [(0.14, 0.08), (0.38, 0.22), (0.26, 0.13), (0.08, 0.04), (0.09, 0.07), (0.23, 0.06), (0.15, 0.09), (0.33, 0.09)]),
    ("TOLNA",    [(0.11, 0.06), (0.34, 0.21), (0.23, 0.11), (0.08, 0.05), (0.11, 0.07), (0.33, 0.06), (0.19, 0.08), (0.33, 0.12)]),
    ("VAS",      [(0.12, 0.07), (0.33, 0.13), (0.21, 0.12), (0.07, 0.06), (0.12, 0.08), (0.23, 0.07), (0.18, 0.08), (0.22, 0.09)]),
    ("VESZPREM", [(0.12, 0.06), (0.35, 0.21), (0.22, 0.12), (0.08, 0.05), (0.12, 0.07), (0.22, 0.06), (0.16, 0.07), (0.34, 0.12)]),
    ("ZALA",     [(0.11, 0.07), (0.33, 0.23), (0.35, 0.21), (0.09, 0.04), (0.13, 0.08), (0.20, 0.05), (0.15, 0.07), (0.30, 0.11)]),
    ("COUNTRY",  [(0.09, 0.02), (0.31, 0.11), (0.25, 0.14), (0.09, 0.07), (0.08, 0.06), (0.23, 0.03), (0.19, 0.08), (0.33, 0.12)]),
];

/// Every published (series, model) loss pair, `TFT` included.
pub fn published_rows() -> Vec<PublishedRow> {
    LOSSES
        .iter()
        .flat_map(|(series, losses)| {
            MODELS.iter().zip(losses).map(|(model, &(loss1, loss2))| PublishedRow { series, model, loss1, loss2 })
        })
        .collect()
}

/// The published losses as a results table over the seven models
/// implemented here. Case-space errors, seeds and sizes are unknown.
pub fn published_table() -> ResultsTable {
    let cells = published_rows()
        .into_iter()
        .filter_map(|r| Model::parse(r.model).ok().map(|m| (r, m)))
        .flat_map(|(r, model)| {
            [(Method::MinMax, r.loss1), (Method::PopulationPercent, r.loss2)].map(|(method, loss)| BenchmarkCell {
                series: r.series.to_string(),
                model,
                method,
                rmse_scaled: Some(loss),
                rmse_cases: None,
                seed: 0,
                wall_ms: None,
                n_params: 0,
                error: None,
            })
        })
        .collect();
    ResultsTable::new(cells)
}
