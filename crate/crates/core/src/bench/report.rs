use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    analyze_improvements, method2_benefit, BenchError, BenchmarkCell, ImprovementAnalysis, Model, ResultsTable,
    PUBLISHED_MEAN_IMPROVEMENT,
};
use crate::preprocess::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "md" | "markdown" => Some(Format::Markdown),
            _ => None,
        }
    }
}

const HEADER: [&str; 9] = ["series", "model", "method", "rmse_scaled", "rmse_cases", "seed", "wall_ms", "n_params", "error"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One record per cell, in the table's canonical order.
pub fn results_csv(table: &ResultsTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for c in &table.cells {
        w.write_record([
            c.series.clone(),
            c.model.label().to_string(),
            c.method.label().to_string(),
            opt(c.rmse_scaled),
            opt(c.rmse_cases),
            c.seed.to_string(),
            opt(c.wall_ms),
            c.n_params.to_string(),
            c.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Parses [`results_csv`] output. `n_params` and `error` may be absent.
pub fn read_results_csv(text: &str) -> Result<ResultsTable, BenchError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let bad = |row: usize, message: String| BenchError::Parse { row, message };
    let headers = rdr.headers().map_err(|e| bad(0, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required: Vec<usize> = HEADER[..7]
        .iter()
        .map(|h| col(h).ok_or_else(|| bad(0, format!("missing column `{h}`"))))
        .collect::<Result<_, _>>()?;
    let (n_params_col, error_col) = (col("n_params"), col("error"));

    let mut cells = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| bad(row, e.to_string()))?;
        let field = |k: usize| rec.get(required[k]).unwrap_or("").trim();
        let num = |k: usize| -> Result<Option<f64>, BenchError> {
            let s = field(k);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|_| bad(row, format!("`{s}` is not a number")))
        };
        let model = Model::parse(field(1)).map_err(|e| bad(row, e.to_string()))?;
        let method = Method::parse(field(2)).ok_or_else(|| bad(row, format!("unknown method `{}`", field(2))))?;
        let seed = field(5).parse::<u64>().map_err(|_| bad(row, format!("bad seed `{}`", field(5))))?;
        let wall_ms = match field(6) {
            "" => None,
            s => Some(s.parse::<u64>().map_err(|_| bad(row, format!("bad wall_ms `{s}`")))?),
        };
        let n_params = match n_params_col.and_then(|c| rec.get(c)).map(str::trim) {
            None | Some("") => 0,
            Some(s) => s.parse().map_err(|_| bad(row, format!("bad n_params `{s}`")))?,
        };
        let error = error_col.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()).map(str::to_string);
        cells.push(BenchmarkCell {
            series: field(0).to_string(),
            model,
            method,
            rmse_scaled: num(3)?,
            rmse_cases: num(4)?,
            seed,
            wall_ms,
            n_params,
            error,
        });
    }
    Ok(ResultsTable::new(cells))
}

#[derive(Serialize, Deserialize)]
struct BestEntry {
    model: Model,
    method: Method,
}

#[derive(Serialize, Deserialize)]
struct Benefit {
    method2_not_worse: usize,
    classical_pairs: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    cells: Vec<BenchmarkCell>,
    best_per_series: std::collections::BTreeMap<String, BestEntry>,
    improvements: Option<ImprovementAnalysis>,
    improvements_error: Option<String>,
    published_mean_improvement: f64,
    method2_benefit: Benefit,
}

pub fn results_json(table: &ResultsTable) -> String {
    let (improvements, improvements_error) = match analyze_improvements(table) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (wins, total) = method2_benefit(table);
    let report = JsonReport {
        cells: table.cells.clone(),
        best_per_series: table
            .best_per_series
            .iter()
            .map(|(s, &(model, method))| (s.clone(), BestEntry { model, method }))
            .collect(),
        improvements,
        improvements_error,
        published_mean_improvement: PUBLISHED_MEAN_IMPROVEMENT,
        method2_benefit: Benefit { method2_not_worse: wins, classical_pairs: total },
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

/// `series,best_model,loss1,loss2,improvement_percent` plus an `AVERAGE` row.
pub fn improvements_csv(analysis: &ImprovementAnalysis) -> String {
    let mut out = String::from("series,best_model,loss1,loss2,improvement_percent\n");
    for r in &analysis.rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.series, r.best_model, r.loss1, r.loss2, r.improvement_percent);
    }
    let _ = writeln!(out, "AVERAGE,,,,{}", analysis.mean);
    out
}

/// Series × model grid of `M1 / M2` losses with the best Method 2 cell of
/// each series in bold, followed by the improvement analysis.
pub fn render_markdown(table: &ResultsTable, decimals: usize) -> String {
    let models = table.models();
    let mut out = String::from("# Benchmark results\n\n");
    out.push_str("Each cell is `M1 / M2` RMSE in normalized units. Bold marks the best Method 2 model of the series.\n\n");
    out.push_str("| Series |");
    for m in &models {
        let _ = write!(out, " {m} |");
    }
    out.push_str("\n|---|");
    for _ in &models {
        out.push_str("---|");
    }
    out.push('\n');
    let fmt = |c: Option<&BenchmarkCell>| match c {
        None => "n/a".to_string(),
        Some(c) if !c.is_ok() => "error".to_string(),
        Some(c) => format!("{:.*}", decimals, c.rmse_scaled.unwrap_or(f64::NAN)),
    };
    for s in table.series() {
        let _ = write!(out, "| {s} |");
        for &m in &models {
            let m1 = fmt(table.cell(s, m, Method::MinMax));
            let mut m2 = fmt(table.cell(s, m, Method::PopulationPercent));
            if table.best_per_series.get(s).map(|b| b.0) == Some(m) {
                m2 = format!("**{m2}**");
            }
            let _ = write!(out, " {m1} / {m2} |");
        }
        out.push('\n');
    }

    out.push_str("\n## Method 1 to Method 2 improvement\n\n");
    match analyze_improvements(table) {
        Ok(a) => {
            out.push_str("| Series | Best model | M1 | M2 | Improvement % |\n|---|---|---|---|---|\n");
            for r in &a.rows {
                let _ = writeln!(
                    out,
                    "| {} | {} | {:.*} | {:.*} | {:.2} |",
                    r.series, r.best_model, decimals, r.loss1, decimals, r.loss2, r.improvement_percent
                );
            }
            let _ = writeln!(
                out,
                "\nMean improvement over {} series: {:.2}%. Published mean: {:.2}% (difference {:+.2} points).",
                a.rows.len(),
                a.mean,
                PUBLISHED_MEAN_IMPROVEMENT,
                a.mean - PUBLISHED_MEAN_IMPROVEMENT
            );
            if let (Some(max), Some(min)) = (a.max(), a.min()) {
                let _ = writeln!(
                    out,
                    "Largest: {} / {} at {:.2}%. Smallest: {} / {} at {:.2}%.",
                    max.series, max.best_model, max.improvement_percent, min.series, min.best_model, min.improvement_percent
                );
            }
        }
        Err(e) => {
            let _ = writeln!(out, "Not available: {e}.");
        }
    }

    let (wins, total) = method2_benefit(table);
    if total > 0 {
        let _ = writeln!(
            out,
            "\n## Case-count error, classical models\n\nMethod 2 `rmse_cases` at or below Method 1 in {wins} of {total} pairs ({:.1}%).",
            100.0 * wins as f64 / total as f64
        );
    }

    let failed: Vec<&BenchmarkCell> = table.cells.iter().filter(|c| !c.is_ok()).collect();
    if !failed.is_empty() {
        out.push_str("\n## Failed cells\n\n");
        for c in failed {
            let _ = writeln!(out, "- {} / {} / {}: {}", c.series, c.model, c.method, c.error.as_deref().unwrap_or("no result"));
        }
    }
    out
}

/// Writes the table in `format` to `path`.
pub fn emit_results(table: &ResultsTable, format: Format, path: &Path) -> Result<(), BenchError> {
    let text = match format {
        Format::Csv => results_csv(table),
        Format::Json => results_json(table),
        Format::Markdown => render_markdown(table, 3),
    };
    std::fs::write(path, text)?;
    Ok(())
}
