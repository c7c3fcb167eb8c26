use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use otp_core::data_io::{
    load_csv, make_split, read_predictions, standardize, write_predictions, write_trace,
    RunConfig, SplitSpec,
};
use otp_core::metrics::{ari, contingency, nmi};
use otp_core::propagation::{run_otp, OtpConfig, OtpOutcome};
use otp_core::sinkhorn::SinkhornConfig;
use otp_core::{Dataset, Error, PartitionState, Result};

use crate::{BenchArgs, CommonArgs, EvalArgs, RunArgs};

impl CommonArgs {
    fn otp_config(&self) -> OtpConfig {
        OtpConfig {
            alpha: self.alpha,
            sinkhorn: SinkhornConfig {
                epsilon: self.epsilon,
                max_iterations: self.max_iterations,
                feasibility_tol: self.feasibility_tol,
            },
        }
    }
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Final labeling of every dataset row, in row order.
fn full_labeling(state: &PartitionState, n: usize) -> Vec<usize> {
    let mut labels = vec![usize::MAX; n];
    for (pos, &i) in state.labeled_idx().iter().enumerate() {
        labels[i] = state.labels()[pos];
    }
    debug_assert!(labels.iter().all(|l| *l != usize::MAX));
    labels
}

fn agreement(dataset: &Dataset, outcome: &OtpOutcome) -> Result<(f64, f64)> {
    let pred = full_labeling(&outcome.state, dataset.n_points());
    let truth: Vec<usize> = (0..dataset.n_points())
        .map(|i| dataset.label(i).expect("bench needs a fully labeled dataset"))
        .collect();
    let table = contingency(&pred, &truth)?;
    Ok((nmi(&table), ari(&table)))
}

#[derive(Serialize)]
struct Timings {
    load_ms: f64,
    preprocess_ms: f64,
    split_ms: f64,
    propagate_ms: f64,
    write_ms: f64,
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    data: String,
    label_col: String,
    epsilon: f64,
    alpha: f64,
    max_iterations: usize,
    feasibility_tol: f64,
    labeled_fraction: f64,
    seed: u64,
    stratified: bool,
    standardize: bool,
    output: String,
    trace: String,
    dataset_sha256: String,
    n_points: usize,
    n_features: usize,
    n_classes: usize,
    seed_labeled: usize,
    pseudo_labeled: usize,
    iterations: usize,
    started_unix_ms: u128,
    timings: Timings,
}

pub fn run(args: RunArgs) -> Result<()> {
    let started_unix_ms = unix_ms();
    let common = &args.common;
    let cfg = common.otp_config();

    let t = Instant::now();
    let raw = load_csv(&common.data, &common.label_col)?;
    let fingerprint = sha256_hex(&common.data)?;
    let load_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let dataset = if common.no_standardize {
        raw
    } else {
        standardize(&raw)
    };
    let preprocess_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let seed_state = match args.labeled_fraction {
        Some(fraction) => {
            let spec = SplitSpec {
                labeled_fraction: fraction,
                seed: args.seed,
                stratified: common.stratified,
            };
            make_split(&dataset, &spec)?
        }
        None => {
            // the file's own label mask defines the split
            let mut labeled = Vec::new();
            let mut labels = Vec::new();
            let mut unlabeled = Vec::new();
            for i in 0..dataset.n_points() {
                match dataset.label(i) {
                    Some(k) => {
                        labeled.push(i);
                        labels.push(k);
                    }
                    None => unlabeled.push(i),
                }
            }
            if unlabeled.is_empty() {
                return Err(Error::InvalidConfig(
                    "no unlabeled rows; pass --labeled-fraction to mask some".into(),
                ));
            }
            PartitionState::new(labeled, labels, unlabeled)
        }
    };
    let split_ms = t.elapsed().as_secs_f64() * 1e3;
    let seed_labeled = seed_state.n_labeled();
    let resolved_fraction = seed_labeled as f64 / dataset.n_points() as f64;

    let t = Instant::now();
    let outcome = run_otp(&dataset, seed_state, &cfg)?;
    let propagate_ms = t.elapsed().as_secs_f64() * 1e3;

    let trace_path = args
        .trace
        .clone()
        .unwrap_or_else(|| args.output.with_extension("trace.json"));
    let t = Instant::now();
    write_predictions(&args.output, &dataset, &outcome)?;
    let run_config = RunConfig {
        epsilon: common.epsilon,
        alpha: common.alpha,
        max_iterations: common.max_iterations,
        feasibility_tol: common.feasibility_tol,
        labeled_fraction: resolved_fraction,
        seed: args.seed,
        stratified: common.stratified,
        standardize: !common.no_standardize,
    };
    write_trace(&trace_path, &run_config, &outcome.trace)?;
    let write_ms = t.elapsed().as_secs_f64() * 1e3;

    let manifest = RunManifest {
        command: "run",
        data: common.data.display().to_string(),
        label_col: common.label_col.clone(),
        epsilon: common.epsilon,
        alpha: common.alpha,
        max_iterations: common.max_iterations,
        feasibility_tol: common.feasibility_tol,
        labeled_fraction: resolved_fraction,
        seed: args.seed,
        stratified: common.stratified,
        standardize: !common.no_standardize,
        output: args.output.display().to_string(),
        trace: trace_path.display().to_string(),
        dataset_sha256: fingerprint,
        n_points: dataset.n_points(),
        n_features: dataset.n_features(),
        n_classes: dataset.n_classes(),
        seed_labeled,
        pseudo_labeled: outcome.assignments.len(),
        iterations: outcome.trace.iterations.len(),
        started_unix_ms,
        timings: Timings {
            load_ms,
            preprocess_ms,
            split_ms,
            propagate_ms,
            write_ms,
        },
    };
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

struct CellResult {
    nmi: f64,
    ari: f64,
    iterations: usize,
    runtime_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub dataset: String,
    pub fraction: f64,
    pub mean_nmi: f64,
    pub std_nmi: f64,
    pub mean_ari: f64,
    pub std_ari: f64,
    pub mean_iterations: f64,
    pub mean_runtime_ms: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for a single observation.
fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let common = &args.common;
    if args.repeats == 0 {
        return Err(Error::InvalidConfig("--repeats must be positive".into()));
    }
    let raw = load_csv(&common.data, &common.label_col)?;
    if !raw.fully_labeled() {
        return Err(Error::InvalidConfig(
            "bench needs a fully labeled dataset; it masks labels itself".into(),
        ));
    }
    let dataset = if common.no_standardize {
        raw
    } else {
        standardize(&raw)
    };
    let cfg = common.otp_config();
    let dataset_name = common
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| common.data.display().to_string());

    // independent (fraction, seed) cells; fixed result slots keep the
    // output order independent of scheduling
    let cells: Vec<(usize, u64)> = args
        .fractions
        .iter()
        .enumerate()
        .flat_map(|(fi, _)| (0..args.repeats).map(move |r| (fi, args.seed + r as u64)))
        .collect();
    let results: Mutex<Vec<Option<Result<CellResult>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = args
        .threads
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        })
        .clamp(1, cells.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let (fi, seed) = cells[i];
                let spec = SplitSpec {
                    labeled_fraction: args.fractions[fi],
                    seed,
                    stratified: common.stratified,
                };
                let started = Instant::now();
                let cell = make_split(&dataset, &spec)
                    .and_then(|state| run_otp(&dataset, state, &cfg))
                    .and_then(|outcome| {
                        let (nmi_v, ari_v) = agreement(&dataset, &outcome)?;
                        Ok(CellResult {
                            nmi: nmi_v,
                            ari: ari_v,
                            iterations: outcome.trace.iterations.len(),
                            runtime_ms: started.elapsed().as_secs_f64() * 1e3,
                        })
                    });
                results.lock().unwrap()[i] = Some(cell);
            });
        }
    });

    let results = results.into_inner().unwrap();
    let mut rows = Vec::new();
    let mut cell_results: Vec<Option<Result<CellResult>>> = results;
    for (fi, &fraction) in args.fractions.iter().enumerate() {
        let mut nmis = Vec::new();
        let mut aris = Vec::new();
        let mut iters = Vec::new();
        let mut times = Vec::new();
        for (ci, &(cfi, seed)) in cells.iter().enumerate() {
            if cfi != fi {
                continue;
            }
            match cell_results[ci].take().expect("every cell ran") {
                Ok(cell) => {
                    nmis.push(cell.nmi);
                    aris.push(cell.ari);
                    iters.push(cell.iterations as f64);
                    times.push(cell.runtime_ms);
                }
                Err(e) => {
                    // keep the error kind so the exit code distinguishes
                    // solver failure from bad input
                    eprintln!("bench cell failed: fraction {fraction}, seed {seed}");
                    return Err(e);
                }
            }
        }
        rows.push(BenchRow {
            dataset: dataset_name.clone(),
            fraction,
            mean_nmi: mean(nmis.iter().copied()),
            std_nmi: std_dev(&nmis),
            mean_ari: mean(aris.iter().copied()),
            std_ari: std_dev(&aris),
            mean_iterations: mean(iters.iter().copied()),
            mean_runtime_ms: mean(times.iter().copied()),
        });
    }

    print_bench_table(&rows);
    if let Some(path) = &args.output {
        write_bench_csv(path, &rows)?;
    }
    Ok(())
}

fn print_bench_table(rows: &[BenchRow]) {
    println!(
        "{:<16} {:>8} {:>9} {:>8} {:>9} {:>8} {:>16} {:>16}",
        "dataset",
        "fraction",
        "mean_nmi",
        "std_nmi",
        "mean_ari",
        "std_ari",
        "mean_iterations",
        "mean_runtime_ms"
    );
    for r in rows {
        println!(
            "{:<16} {:>8.2} {:>9.4} {:>8.4} {:>9.4} {:>8.4} {:>16.1} {:>16.1}",
            r.dataset,
            r.fraction,
            r.mean_nmi,
            r.std_nmi,
            r.mean_ari,
            r.std_ari,
            r.mean_iterations,
            r.mean_runtime_ms
        );
    }
}

fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "dataset",
        "fraction",
        "mean_nmi",
        "std_nmi",
        "mean_ari",
        "std_ari",
        "mean_iterations",
        "mean_runtime_ms",
    ])?;
    for r in rows {
        writer.write_record([
            r.dataset.clone(),
            format!("{}", r.fraction),
            format!("{:.6}", r.mean_nmi),
            format!("{:.6}", r.std_nmi),
            format!("{:.6}", r.mean_ari),
            format!("{:.6}", r.std_ari),
            format!("{:.2}", r.mean_iterations),
            format!("{:.2}", r.mean_runtime_ms),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    nmi: f64,
    ari: f64,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let mut pred = read_predictions(&args.predictions)?;
    let mut truth = read_predictions(&args.truth)?;
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    pred.sort_by_key(|r| r.row_index);
    truth.sort_by_key(|r| r.row_index);
    for (p, t) in pred.iter().zip(&truth) {
        if p.row_index != t.row_index {
            return Err(Error::InvalidConfig(format!(
                "row_index sets differ: {} vs {}",
                p.row_index, t.row_index
            )));
        }
    }
    if pred.windows(2).any(|w| w[0].row_index == w[1].row_index) {
        return Err(Error::InvalidConfig("duplicate row_index".into()));
    }

    // class ids per file by first appearance; both metrics are invariant to
    // the labeling of either side
    let to_ids = |rows: &[otp_core::data_io::PredictionRow]| {
        let mut names: Vec<&str> = Vec::new();
        rows.iter()
            .map(|r| {
                match names.iter().position(|n| *n == r.predicted_label) {
                    Some(i) => i,
                    None => {
                        names.push(&r.predicted_label);
                        names.len() - 1
                    }
                }
            })
            .collect::<Vec<usize>>()
    };
    let pred_ids = to_ids(&pred);
    let truth_ids = to_ids(&truth);
    let table = contingency(&pred_ids, &truth_ids)?;
    let report = EvalReport {
        nmi: nmi(&table),
        ari: ari(&table),
    };
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}
