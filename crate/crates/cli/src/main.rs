use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, Parser, Subcommand};

use poxcast::bench::{
    analyze_improvements, cell_seed, emit_results, fit_and_forecast, improvements_csv, method2_benefit,
    published_table, read_results_csv, render_markdown, results_csv, results_json, run_benchmark_with, BenchConfig,
    CellError, Format, Model, ResultsTable, TrainedModel,
};
use poxcast::eda::{argmax, decompose_additive, emit_figure_data, mean_per_capita, mean_weekly_cases, FigureData};
use poxcast::ingest::{attach_population, parse_cases_csv, parse_population_csv, PopulationSeries};
use poxcast::preprocess::Method;
use poxcast::series::{canonical_county, Dataset, COUNTRY};

#[derive(Parser)]
#[command(name = "poxcast", version, about = "Weekly county chickenpox forecasting benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the input files and print a dataset summary.
    Validate {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        population: Option<PathBuf>,
    },
    /// Write the exploratory tables under <out>/eda.
    Eda {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit one model on one series and score its rolling forecasts.
    Train(TrainArgs),
    /// Run the (series × model × method) matrix.
    Benchmark(BenchArgs),
    /// Re-render an existing results.csv, or the published losses.
    Report(ReportArgs),
    /// Write a seeded synthetic cases/population pair with the reference layout.
    Synth {
        #[arg(long, default_value = "data/synthetic")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = poxcast::synthetic::SURROGATE_WEEKS)]
        weeks: usize,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    cases: PathBuf,
    #[arg(long)]
    population: PathBuf,
}

#[derive(Args)]
struct ProtocolArgs {
    /// Share of each series used for training.
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 52)]
    period: usize,
    /// Fourier pairs used as SARIMAX regressors.
    #[arg(long, default_value_t = 2)]
    harmonics: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    deepar_samples: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    series: String,
    #[arg(long, value_parser = parse_model)]
    model: Model,
    #[arg(long, value_parser = parse_method, default_value = "2")]
    method: Method,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Every series, model and method (the default when nothing is selected).
    #[arg(long, conflicts_with_all = ["series", "model_set", "methods"])]
    all: bool,
    #[arg(long, value_delimiter = ',')]
    series: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    model_set: Vec<Model>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Record per-cell wall time in wall_ms (makes outputs run-dependent).
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    protocol: ProtocolArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, required_unless_present = "published", conflicts_with = "published")]
    results: Option<PathBuf>,
    /// Use the published losses instead of a results file.
    #[arg(long)]
    published: bool,
    #[arg(long, value_parser = parse_format, default_value = "md")]
    format: Format,
    /// Write results.{csv,json,md} and improvements.csv here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_model(s: &str) -> Result<Model, String> {
    Model::parse(s).map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}` (use 1, 2, M1 or M2)"))
}

fn parse_format(s: &str) -> Result<Format, String> {
    Format::parse(s).ok_or_else(|| format!("unknown format `{s}` (use csv, json or md)"))
}

/// Exit 1 for bad input data, 3 for anything that went wrong on our side.
enum Failure {
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 1,
            Failure::Internal(_) => 3,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn internal<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Internal(e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load_cases(path: &Path) -> Result<Dataset, Failure> {
    parse_cases_csv(&read(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn load(args: &DataArgs) -> Result<(Dataset, BTreeMap<String, PopulationSeries>), Failure> {
    let dataset = load_cases(&args.cases)?;
    let table = parse_population_csv(&read(&args.population)?)
        .map_err(|e| Failure::Data(format!("{}: {e}", args.population.display())))?;
    let pops = attach_population(&dataset, &table).map_err(data)?;
    Ok((dataset, pops))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Internal(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn series_id(name: &str) -> String {
    if name.eq_ignore_ascii_case(COUNTRY) {
        COUNTRY.to_string()
    } else {
        canonical_county(name)
    }
}

fn bench_config(p: &ProtocolArgs) -> Result<BenchConfig, Failure> {
    if !(p.ratio > 0.0 && p.ratio < 1.0) {
        return Err(Failure::Data(format!("--ratio must lie strictly between 0 and 1, got {}", p.ratio)));
    }
    let mut cfg = BenchConfig { ratio: p.ratio, period: p.period, harmonics: p.harmonics, ..Default::default() };
    let n = &mut cfg.neural;
    n.epochs = p.epochs.unwrap_or(n.epochs);
    n.learning_rate = p.learning_rate.unwrap_or(n.learning_rate);
    n.window = p.window.unwrap_or(n.window);
    n.batch_size = p.batch_size.unwrap_or(n.batch_size);
    n.hidden_size = p.hidden_size.unwrap_or(n.hidden_size);
    n.deepar_samples = p.deepar_samples.unwrap_or(n.deepar_samples);
    n.validate().map_err(data)?;
    Ok(cfg)
}

fn validate(cases: &Path, population: Option<&Path>) -> Result<(), Failure> {
    let dataset = load_cases(cases)?;
    let dates = dataset.dates();
    println!("weeks: {}", dataset.len());
    println!("range: {} to {}", dates[0], dates[dates.len() - 1]);
    println!("counties: {}", dataset.county_names().len());
    if let Some(path) = population {
        let table = parse_population_csv(&read(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        attach_population(&dataset, &table).map_err(data)?;
        let years: Vec<i32> = table.counties().flat_map(|c| table.anchors(c).unwrap_or(&[]).iter().map(|a| a.0)).collect();
        println!(
            "population: {} counties, years {} to {}",
            table.counties().count(),
            years.iter().min().copied().unwrap_or_default(),
            years.iter().max().copied().unwrap_or_default()
        );
    }
    Ok(())
}

fn eda(args: &DataArgs, out: &Path) -> Result<(), Failure> {
    let (dataset, pops) = load(args)?;
    let dir = out.join("eda");
    fs::create_dir_all(&dir).map_err(internal)?;
    let means = mean_weekly_cases(&dataset);
    let per_capita = mean_per_capita(&dataset, &pops).map_err(data)?;
    let order = dataset.county_names();
    let figure = FigureData::Averages { means: &means, per_capita: &per_capita, order: &order };
    emit_figure_data(&figure, &dir.join("eda-averages.csv")).map_err(internal)?;
    let decomposition = decompose_additive(&dataset.aggregate_country(), 52).map_err(data)?;
    emit_figure_data(&FigureData::Decomposition(&decomposition), &dir.join("eda-decomposition.csv")).map_err(internal)?;
    let all = dataset.all_series();
    emit_figure_data(&FigureData::Series(&all), &dir.join("eda-series.csv")).map_err(internal)?;

    println!("highest mean weekly cases: {}", argmax(&means).unwrap_or("-"));
    println!("highest mean per-capita cases: {}", argmax(&per_capita).unwrap_or("-"));
    println!("country trend slope: {:.6} cases/week", decomposition.trend_slope());
    println!(
        "seasonal peak ISO week: {}, trough: {}",
        decomposition.seasonal_peak_week(),
        decomposition.seasonal_trough_week()
    );
    println!("wrote {}", dir.display());
    Ok(())
}

fn train(args: &TrainArgs) -> Result<(), Failure> {
    let (dataset, pops) = load(&args.data)?;
    let cfg = bench_config(&args.protocol)?;
    let id = series_id(&args.series);
    let series = dataset.series(&id).ok_or_else(|| Failure::Data(format!("unknown series `{}`", args.series)))?;
    let seed = cell_seed(args.seed, &id, args.model, args.method);
    let run = fit_and_forecast(&series, pops.get(&id), args.model, args.method, &cfg, seed).map_err(|e| match e {
        CellError::Preprocess(_) => data(e),
        other => internal(other),
    })?;

    let stem = format!("{id}-{}-{}", args.model, args.method);
    let dir = args.out.join("models");
    write(&dir.join(format!("{stem}.json")), &run.model.to_json())?;
    let train_loss = match &run.model {
        TrainedModel::Classical(m) => m.sigma2,
        TrainedModel::Neural(m) => {
            write(&dir.join(format!("{stem}-loss.csv")), &m.loss_curve_csv())?;
            m.train_loss_curve.last().copied().unwrap_or(f64::NAN)
        }
    };
    let mut forecast = String::from("date,observed,predicted,predicted_scaled\n");
    for (i, d) in run.test.dates().iter().enumerate() {
        forecast.push_str(&format!(
            "{d},{},{},{}\n",
            run.test.values()[i],
            run.predictions_cases[i],
            run.predictions_scaled[i]
        ));
    }
    write(&dir.join(format!("{stem}-forecast.csv")), &forecast)?;

    if let TrainedModel::Classical(m) = &run.model {
        println!("order: {}", m.order);
    }
    println!("parameters: {}", run.model.n_params());
    println!("train loss: {train_loss:.6}");
    println!("rmse_scaled: {:.6}", run.rmse_scaled);
    println!("rmse_cases: {:.4}", run.rmse_cases);
    println!("wrote {}", dir.join(format!("{stem}.json")).display());
    Ok(())
}

fn write_reports(table: &ResultsTable, out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::Internal(format!("{}: {e}", out.display())))?;
    for f in Format::ALL {
        emit_results(table, f, &out.join(format!("results.{}", f.extension()))).map_err(internal)?;
    }
    match analyze_improvements(table) {
        Ok(a) => write(&out.join("improvements.csv"), &improvements_csv(&a))?,
        Err(e) => eprintln!("improvement analysis skipped: {e}"),
    }
    Ok(())
}

fn summarize(table: &ResultsTable) {
    println!("cells: {} ({} failed)", table.cells.len(), table.error_count());
    if let Ok(a) = analyze_improvements(table) {
        println!("mean improvement M1 -> M2 over {} series: {:.2}%", a.rows.len(), a.mean);
    }
    let (wins, total) = method2_benefit(table);
    if total > 0 {
        println!(
            "classical pairs with M2 rmse_cases <= M1: {wins}/{total} ({:.1}%)",
            100.0 * wins as f64 / total as f64
        );
    }
}

fn benchmark(args: &BenchArgs) -> Result<(), Failure> {
    let (dataset, pops) = load(&args.data)?;
    let mut cfg = bench_config(&args.protocol)?;
    if !args.series.is_empty() {
        cfg.series = Some(args.series.iter().map(|s| series_id(s)).collect());
    }
    if !args.model_set.is_empty() {
        cfg.models = args.model_set.clone();
    }
    if !args.methods.is_empty() {
        cfg.methods = args.methods.clone();
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j.max(1);
    }
    cfg.record_timings = args.timings;

    let n_series = cfg.series.as_ref().map_or(dataset.counties().count() + 1, Vec::len);
    let total = n_series * cfg.models.len() * cfg.methods.len();
    let done = AtomicUsize::new(0);
    let progress = |c: &poxcast::bench::BenchmarkCell| {
        let k = done.fetch_add(1, Ordering::SeqCst) + 1;
        match (&c.error, c.rmse_scaled) {
            (None, Some(r)) => eprintln!("[{k}/{total}] {} {} {} rmse_scaled={r:.4}", c.series, c.model, c.method),
            (e, _) => eprintln!("[{k}/{total}] {} {} {} failed: {}", c.series, c.model, c.method, e.as_deref().unwrap_or("?")),
        }
    };
    let table = run_benchmark_with(&dataset, &pops, &cfg, args.seed, &progress).map_err(data)?;
    write_reports(&table, &args.out)?;
    summarize(&table);
    println!("wrote {}", args.out.display());
    if table.cells.iter().all(|c| !c.is_ok()) {
        return Err(Failure::Internal("every cell failed".into()));
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<(), Failure> {
    let table = match &args.results {
        Some(path) => {
            let text = String::from_utf8(read(path)?).map_err(data)?;
            read_results_csv(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?
        }
        None => published_table(),
    };
    let decimals = if args.published { 2 } else { 3 };
    match &args.out {
        Some(out) => {
            write_reports(&table, out)?;
            if args.published {
                // the published grid reads better at its printed precision
                write(&out.join("results.md"), &render_markdown(&table, decimals))?;
            }
            summarize(&table);
        }
        None => {
            let text = match args.format {
                Format::Csv => results_csv(&table),
                Format::Json => results_json(&table),
                Format::Markdown => render_markdown(&table, decimals),
            };
            print!("{text}");
        }
    }
    Ok(())
}

fn synth(out: &Path, seed: u64, weeks: usize) -> Result<(), Failure> {
    if weeks < 2 * 52 + 1 {
        return Err(Failure::Data(format!("--weeks must be at least {}", 2 * 52 + 1)));
    }
    let s = poxcast::synthetic::surrogate(seed, weeks);
    write(&out.join("cases.csv"), &s.cases_csv)?;
    write(&out.join("population.csv"), &s.population_csv)?;
    println!("wrote {} and {}", out.join("cases.csv").display(), out.join("population.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { cases, population } => validate(cases, population.as_deref()),
        Command::Eda { data, out } => eda(data, out),
        Command::Train(args) => train(args),
        Command::Benchmark(args) => benchmark(args),
        Command::Report(args) => report(args),
        Command::Synth { out, seed, weeks } => synth(out, *seed, *weeks),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Data(msg) | Failure::Internal(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
