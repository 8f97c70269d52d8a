//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout.
//! `POXCAST_DATA_DIR` (holding `cases.csv` and `population.csv`) switches the
//! data-dependent checks to the reference data. Without it they run on the
//! seeded surrogate, and criteria 4, 8 and 9 report BLOCKED next to what the
//! surrogate gives. `POXCAST_ACCEPTANCE_FULL=1` runs the criterion 10
//! benchmark at full training size.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use poxcast::bench::{
    analyze_improvements, improvement_percent, method2_benefit, published_table, read_results_csv, render_markdown,
    rmse, run_benchmark, BenchConfig, Model, ResultsTable, PUBLISHED_MEAN_IMPROVEMENT,
};
use poxcast::classical::{fit, rolling_forecast, ArimaModel, ArimaOrder, ArimaParams, ExogSpec, FitConfig};
use poxcast::eda::{argmax, decompose_additive, mean_per_capita, mean_weekly_cases};
use poxcast::ingest::{attach_population, parse_cases_csv, parse_population_csv, PopulationSeries};
use poxcast::neural::{
    deepar_step, gradient_check, gru_forward, lstm_forward, nbeats_forward, network_loss, train, Architecture,
    ModelKind, NBeatsConfig, NeuralConfig, Tensor,
};
use poxcast::preprocess::{denormalize, make_windows, normalize, split_train_test, Method};
use poxcast::series::{Dataset, TimeSeries, WeekDate, COUNTIES, COUNTRY};
use poxcast::synthetic::{surrogate, SURROGATE_WEEKS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Blocked,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
}

/// Data-dependent criteria only count on the reference data; on the
/// surrogate the measurement is shown but not judged.
fn judged(data: &Data, ok: bool, detail: String) -> Outcome {
    if data.reference {
        verdict(ok, detail)
    } else {
        let seen = if ok { "would pass" } else { "would fail" };
        Outcome {
            status: Status::Blocked,
            detail: format!("reference data not available (set POXCAST_DATA_DIR); surrogate {seen}: {detail}"),
        }
    }
}

struct Data {
    label: &'static str,
    reference: bool,
    dataset: Dataset,
    populations: BTreeMap<String, PopulationSeries>,
    cases: PathBuf,
    population: PathBuf,
    /// True Poisson means, known only for the surrogate.
    means: Option<Vec<Vec<f64>>>,
    _dir: Option<tempfile::TempDir>,
}

fn load_data() -> Data {
    if let Some(dir) = std::env::var_os("POXCAST_DATA_DIR") {
        let dir = PathBuf::from(dir);
        let (cases, population) = (dir.join("cases.csv"), dir.join("population.csv"));
        let dataset = parse_cases_csv(&std::fs::read(&cases).unwrap()).unwrap();
        let table = parse_population_csv(&std::fs::read(&population).unwrap()).unwrap();
        let populations = attach_population(&dataset, &table).unwrap();
        return Data {
            label: "reference",
            reference: true,
            dataset,
            populations,
            cases,
            population,
            means: None,
            _dir: None,
        };
    }
    let s = surrogate(1, SURROGATE_WEEKS);
    let dir = tempfile::tempdir().unwrap();
    let (cases, population) = (dir.path().join("cases.csv"), dir.path().join("population.csv"));
    std::fs::write(&cases, &s.cases_csv).unwrap();
    std::fs::write(&population, &s.population_csv).unwrap();
    let populations = attach_population(&s.dataset, &s.population).unwrap();
    Data {
        label: "surrogate",
        reference: false,
        dataset: s.dataset,
        populations,
        cases,
        population,
        means: Some(s.means),
        _dir: Some(dir),
    }
}

fn full_mode() -> bool {
    std::env::var("POXCAST_ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

fn weekly(id: &str, values: Vec<f64>) -> TimeSeries {
    TimeSeries::weekly(id, WeekDate::from_ymd(2005, 1, 3).unwrap(), values).unwrap()
}

fn normal_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn oracle_rmse(p: &[f64], o: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    while i < p.len() {
        let d = p[i] - o[i];
        total += d * d;
        i += 1;
    }
    (total / p.len() as f64).sqrt()
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let o: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        worst = worst.max((rmse(&p, &o).unwrap() - oracle_rmse(&p, &o)).abs());
    }
    let same = rmse(&[1.0, -2.0, 3.5], &[1.0, -2.0, 3.5]).unwrap() == 0.0;
    let half = (rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12;
    let offset = (rmse(&[2.5, -1.0, 7.0, 0.0], &[0.5, -3.0, 5.0, -2.0]).unwrap() - 2.0).abs() < 1e-12;
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst < 1e-12 && same && half && offset && secs < 1.0,
        format!("max |rmse - oracle| = {worst:.1e} over 1000 pairs, examples {}, {secs:.3} s", ok_word(same && half && offset)),
    )
}

fn ok_word(ok: bool) -> &'static str {
    if ok {
        "hold"
    } else {
        "FAIL"
    }
}

fn criterion_2() -> Outcome {
    let country = improvement_percent(0.09, 0.02).unwrap();
    let vas = improvement_percent(0.07, 0.06).unwrap();
    let table = published_table();
    let analysis = analyze_improvements(&table).unwrap();
    let md = render_markdown(&table, 2);
    let flagged = md.contains(&format!("Published mean: {PUBLISHED_MEAN_IMPROVEMENT:.2}%")) && md.contains("difference");
    let ok = format!("{country:.2}") == "77.78"
        && format!("{vas:.2}") == "14.29"
        && (50.0..=54.0).contains(&analysis.mean)
        && flagged;
    verdict(
        ok,
        format!(
            "COUNTRY/SARIMAX {country:.2}, VAS/LSTM {vas:.2}, recomputed mean {:.2} vs stated {PUBLISHED_MEAN_IMPROVEMENT}, report flags delta: {flagged}",
            analysis.mean
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = rng.random_range(20..300);
        let level = rng.random_range(1.0..5000.0);
        let values: Vec<f64> = (0..n).map(|_| (level * rng.random_range(0.0..2.0f64)).round()).collect();
        let series = weekly(&format!("S{k}"), values);
        let start = rng.random_range(1e5..2e6);
        let drift = rng.random_range(-0.001..0.001);
        let pop: Vec<f64> = (0..n).map(|i| start * (1.0 + drift * i as f64)).collect();
        let pop = PopulationSeries::new(series.id(), series.dates().to_vec(), pop);
        let split = split_train_test(&series, 0.8).unwrap();
        for method in Method::ALL {
            let norm = normalize(&split, method, Some(&pop)).unwrap();
            for (part, original) in [(&norm.train, &split.train), (&norm.test, &split.test)] {
                let back = denormalize(part.values(), part.dates(), &norm.params).unwrap();
                for (b, o) in back.iter().zip(original.values()) {
                    worst = worst.max((b - o).abs());
                }
            }
        }
    }
    verdict(worst < 1e-9, format!("max round-trip error {worst:.1e} over 100 series x 2 methods"))
}

fn criterion_4(data: &Data) -> Outcome {
    let started = Instant::now();
    let means = mean_weekly_cases(&data.dataset);
    let per_capita = mean_per_capita(&data.dataset, &data.populations).unwrap();
    let top = argmax(&means).unwrap_or("-").to_string();
    let top_pc = argmax(&per_capita).unwrap_or("-").to_string();
    let decomposition = decompose_additive(&data.dataset.aggregate_country(), 52).unwrap();
    let slope = decomposition.trend_slope();
    let peak = decomposition.seasonal_peak_week();
    let secs = started.elapsed().as_secs_f64();
    let winter = peak >= 48 || peak <= 9;
    let detail = format!(
        "top mean {top}, top per-capita {top_pc}, country trend slope {slope:.3}, seasonal peak ISO week {peak}, {secs:.2} s"
    );
    judged(data, top == "BUDAPEST" && top_pc == "VESZPREM" && slope < 0.0 && winter && secs < 10.0, detail)
}

fn criterion_5(data: &Data) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut inputs: Vec<TimeSeries> = data.dataset.all_series();
    for k in 0..20 {
        let n = rng.random_range(110..400);
        let values: Vec<f64> = (0..n)
            .map(|i| 50.0 + (i as f64 * 0.12).sin() * 20.0 + rng.random_range(-5.0..5.0) - 0.05 * i as f64)
            .collect();
        inputs.push(weekly(&format!("R{k}"), values));
    }
    let (mut worst, mut periodic) = (0.0f64, true);
    for s in &inputs {
        let d = decompose_additive(s, 52).unwrap();
        for i in 0..d.observed.len() {
            if let (Some(t), Some(r)) = (d.trend[i], d.residual[i]) {
                worst = worst.max((d.observed[i] - (t + d.seasonal[i] + r)).abs());
            }
        }
        periodic &= (52..d.seasonal.len()).all(|i| d.seasonal[i].to_bits() == d.seasonal[i - 52].to_bits());
    }
    verdict(
        worst < 1e-9 && periodic,
        format!("max reconstruction error {worst:.1e} over {} series, seasonal exactly 52-periodic: {periodic}", inputs.len()),
    )
}

fn simulate_arma(phi: f64, theta: f64, seed: u64, n: usize) -> Vec<f64> {
    let burn = 300;
    let e = normal_noise(&mut ChaCha8Rng::seed_from_u64(seed), n + burn);
    let mut x = vec![0.0; n + burn];
    for t in 1..n + burn {
        x[t] = phi * x[t - 1] + e[t] + theta * e[t - 1];
    }
    x.split_off(burn)
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let cfg = FitConfig::default();
    let ar = fit(&weekly("AR", simulate_arma(0.7, 0.0, 61, 500)), ArimaOrder::arima(1, 0, 0).unwrap(), ExogSpec::None, &cfg)
        .unwrap();
    let ma = fit(&weekly("MA", simulate_arma(0.0, 0.5, 62, 500)), ArimaOrder::arima(0, 0, 1).unwrap(), ExogSpec::None, &cfg)
        .unwrap();
    let phi = ar.params.ar[0];
    let theta = ma.params.ma[0];

    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let x: Vec<f64> = normal_noise(&mut rng, 300).iter().map(|v| 4.0 + 1.5 * v).collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let constant = fit(&weekly("C", x), ArimaOrder::arima(0, 0, 0).unwrap(), ExogSpec::None, &cfg).unwrap();
    let intercept_err = (constant.params.intercept - mean).abs();

    let mut level = 100.0;
    let walk: Vec<f64> = normal_noise(&mut rng, 400)
        .iter()
        .map(|s| {
            level += s;
            level
        })
        .collect();
    let (head, tail) = walk.split_at(300);
    let rw = ArimaModel::from_params(ArimaOrder::arima(0, 1, 0).unwrap(), ExogSpec::None, ArimaParams::default(), &weekly("W", head.to_vec()))
        .unwrap();
    let predicted = rolling_forecast(&rw, tail, &[]).unwrap();
    let lagged = &walk[299..399];
    let exact = predicted.as_slice() == lagged;

    let secs = started.elapsed().as_secs_f64();
    verdict(
        (phi - 0.7).abs() <= 0.1 && (theta - 0.5).abs() <= 0.15 && intercept_err < 1e-6 && exact && secs < 60.0,
        format!(
            "phi {phi:.3} (0.7 +/- 0.1), theta {theta:.3} (0.5 +/- 0.15), |intercept - mean| {intercept_err:.1e}, random walk = lagged truth: {exact}, {secs:.1} s"
        ),
    )
}

fn zeros_with(arch: &Architecture, name: &str, value: f64) -> Vec<Tensor> {
    arch.param_specs()
        .iter()
        .map(|s| {
            let mut t = Tensor::zeros(s.rows, s.cols);
            if s.name == name {
                t.data[0] = value;
            }
            t
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let x = Tensor::new(3, 6, (0..18).map(|_| rng.random_range(-1.0..1.0)).collect());
    let y = Tensor::new(3, 1, (0..3).map(|_| rng.random_range(-1.0..1.0)).collect());
    let nbeats = NBeatsConfig { stacks: 2, blocks_per_stack: 1, layer_width: 5 };
    let mut worst: f64 = 0.0;
    for kind in ModelKind::ALL {
        let arch = Architecture { kind, window: 6, hidden: 4, nbeats };
        let params = arch.init_params(&mut ChaCha8Rng::seed_from_u64(72));
        let report = gradient_check(|p| network_loss(&arch, p, &x, &y), &params, 1e-5, 1e-4);
        ok &= report.passed();
        worst = worst.max(report.max_rel_error);
    }
    notes.push(format!("gradcheck max rel err {worst:.1e}"));

    let window: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
    let arch = |kind| Architecture { kind, window: 12, hidden: 5, nbeats };
    let lstm = lstm_forward(&window, &zeros_with(&arch(ModelKind::Lstm), "b_out", 0.37)).unwrap();
    let gru = gru_forward(&window, &zeros_with(&arch(ModelKind::Gru), "b_out", -1.25)).unwrap();
    let (mu, _) = deepar_step(&window, &zeros_with(&arch(ModelKind::DeepAr), "b_mu", 0.8)).unwrap();
    let (_, nb) = nbeats_forward(&window, &zeros_with(&arch(ModelKind::NBeats), "block1.forecast.b", 0.55), nbeats).unwrap();
    let heads = lstm == 0.37 && gru == -1.25 && mu == 0.8 && nb == 0.55;
    ok &= heads;
    notes.push(format!("zero-weight head bias: {heads}"));

    let series: Vec<f64> = (0..62).map(|i| (i as f64 * 0.31).sin() * 0.8 + 0.1 * (i as f64 * 1.7).cos()).collect();
    let windows = make_windows(&series, 52).unwrap();
    let cfg = NeuralConfig { epochs: 500, seed: 7, ..Default::default() };
    let model = train(ModelKind::Lstm, &windows, &cfg).unwrap();
    let inputs: Vec<&[f64]> = windows.inputs.iter().map(Vec::as_slice).collect();
    let (pred, _) = model.predict_batch(&inputs).unwrap();
    let mse = pred.iter().zip(&windows.targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64;
    ok &= windows.inputs.len() == 10 && mse < 1e-3;
    notes.push(format!("10-window overfit MSE {mse:.1e}"));

    let small = make_windows(&series[..40], 6).unwrap();
    let cfg = NeuralConfig { epochs: 3, window: 6, hidden_size: 8, seed: 42, ..Default::default() };
    let identical = ModelKind::ALL
        .iter()
        .all(|&kind| train(kind, &small, &cfg).unwrap() == train(kind, &small, &cfg).unwrap());
    ok &= identical;
    notes.push(format!("same-seed bit-identical: {identical}"));
    verdict(ok, notes.join(", "))
}

struct BenchRun {
    seconds: f64,
    table: ResultsTable,
}

fn run_cli_benchmark(data: &Data, jobs: usize, out: &Path) -> Result<f64, String> {
    let started = Instant::now();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_poxcast"));
    cmd.args(["benchmark", "--all", "--seed", "42", "--jobs", &jobs.to_string()])
        .arg("--cases")
        .arg(&data.cases)
        .arg("--population")
        .arg(&data.population)
        .arg("--out")
        .arg(out);
    if !full_mode() {
        cmd.args(["--epochs", "2", "--hidden-size", "8"]);
    }
    let output = cmd.output().map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(format!("exit {:?}: {}", output.status.code(), String::from_utf8_lossy(&output.stderr)));
    }
    Ok(started.elapsed().as_secs_f64())
}

fn criterion_10(data: &Data, dir: &Path) -> (Outcome, Option<BenchRun>) {
    const FILES: [&str; 4] = ["results.csv", "results.json", "results.md", "improvements.csv"];
    let (one, eight) = (dir.join("jobs1"), dir.join("jobs8"));
    let secs = match run_cli_benchmark(data, 1, &one) {
        Ok(s) => s,
        Err(e) => return (verdict(false, format!("jobs 1 run failed: {e}")), None),
    };
    if let Err(e) = run_cli_benchmark(data, 8, &eight) {
        return (verdict(false, format!("jobs 8 run failed: {e}")), None);
    }
    let differing: Vec<&str> = FILES
        .iter()
        .copied()
        .filter(|f| std::fs::read(one.join(f)).ok() != std::fs::read(eight.join(f)).ok())
        .collect();
    let table = read_results_csv(&std::fs::read_to_string(one.join("results.csv")).unwrap()).unwrap();
    let scale = if full_mode() { "full training size" } else { "neural cells at --epochs 2 --hidden-size 8" };
    let outcome = verdict(
        differing.is_empty(),
        format!(
            "{} data, {} cells, {scale}: {} of {} output files differ between --jobs 1 and --jobs 8",
            data.label,
            table.cells.len(),
            differing.len(),
            FILES.len()
        ),
    );
    (outcome, Some(BenchRun { seconds: secs, table }))
}

fn criterion_8(data: &Data, run: Option<&BenchRun>) -> Outcome {
    let Some(run) = run else {
        return verdict(false, "benchmark run unavailable");
    };
    let sarimax = run
        .table
        .cell(COUNTRY, Model::Sarimax, Method::PopulationPercent)
        .and_then(|c| c.rmse_scaled)
        .unwrap_or(f64::INFINITY);

    let lstm_scores: Vec<f64> = if full_mode() {
        COUNTIES
            .iter()
            .filter_map(|c| run.table.cell(c, Model::Lstm, Method::PopulationPercent).and_then(|c| c.rmse_scaled))
            .collect()
    } else {
        let cfg = BenchConfig {
            models: vec![Model::Lstm],
            methods: vec![Method::PopulationPercent],
            series: Some(COUNTIES.iter().map(|c| c.to_string()).collect()),
            ..Default::default()
        };
        let table = run_benchmark(&data.dataset, &data.populations, &cfg, 42).unwrap();
        table.cells.iter().filter_map(|c| c.rmse_scaled).collect()
    };
    let good = lstm_scores.iter().filter(|&&r| r <= 0.15).count();
    let worst = lstm_scores.iter().copied().fold(0.0, f64::max);
    let timing = if full_mode() {
        format!("full benchmark {:.1} min on {} core(s)", run.seconds / 60.0, cores())
    } else {
        "full-benchmark runtime not measured in this mode (POXCAST_ACCEPTANCE_FULL=1)".to_string()
    };
    let floor = match &data.means {
        Some(means) => {
            let floor = noise_floor(data, means);
            let above = floor.iter().filter(|&&r| r > 0.15).count();
            let max = floor.iter().copied().fold(0.0, f64::max);
            format!("; a forecaster knowing the true Poisson mean scores > 0.15 on {above}/20 counties (max {max:.4})")
        }
        None => String::new(),
    };
    judged(
        data,
        sarimax <= 0.10 && good >= 15,
        format!(
            "COUNTRY SARIMAX M2 rmse_scaled {sarimax:.4} (<= 0.10), LSTM M2 <= 0.15 on {good}/20 counties (worst {worst:.4}){floor}; {timing}"
        ),
    )
}

/// Method 2 rmse_scaled of predicting each county's test weeks with the
/// generating mean itself.
fn noise_floor(data: &Data, means: &[Vec<f64>]) -> Vec<f64> {
    COUNTIES
        .iter()
        .zip(means)
        .map(|(county, mean)| {
            let series = data.dataset.series(county).unwrap();
            let split = split_train_test(&series, 0.8).unwrap();
            let norm = normalize(&split, Method::PopulationPercent, Some(&data.populations[*county])).unwrap();
            let truth = norm.params.apply(&mean[split.train.len()..], split.test.dates()).unwrap();
            rmse(&truth, norm.test.values()).unwrap()
        })
        .collect()
}

fn cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn criterion_9(data: &Data, run: Option<&BenchRun>) -> Outcome {
    let Some(run) = run else {
        return verdict(false, "benchmark run unavailable");
    };
    let (wins, total) = method2_benefit(&run.table);
    let fraction = if total == 0 { 0.0 } else { wins as f64 / total as f64 };
    judged(
        data,
        total > 0 && fraction >= 0.70,
        format!("Method 2 rmse_cases <= Method 1 in {wins}/{total} classical pairs ({:.1}%, need >= 70%)", fraction * 100.0),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        }
    }
}

fn main() {
    let data = load_data();
    let scratch = tempfile::tempdir().unwrap();
    let mut results: Vec<(u8, &str, Outcome)> = vec![
        (1, "metric exactness", guarded(criterion_1)),
        (2, "improvement reproduction", guarded(criterion_2)),
        (3, "normalization round-trips", guarded(criterion_3)),
        (4, "EDA claims", guarded(|| criterion_4(&data))),
        (5, "decomposition identity", guarded(|| criterion_5(&data))),
        (6, "classical recovery", guarded(criterion_6)),
        (7, "neural correctness", guarded(criterion_7)),
    ];
    let mut run = None;
    let c10 = guarded(|| {
        let (outcome, r) = criterion_10(&data, scratch.path());
        run = r;
        outcome
    });
    results.push((8, "magnitude at desk scale", guarded(|| criterion_8(&data, run.as_ref()))));
    results.push((9, "Method 2 benefit", guarded(|| criterion_9(&data, run.as_ref()))));
    results.push((10, "determinism across jobs", c10));

    let mut failed = 0;
    for (id, name, outcome) in &results {
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Blocked => "BLOCKED",
        };
        println!("criterion {id:>2} [{tag}] {name}: {}", outcome.detail);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
