//! Command-line front end: single propagation runs, prediction evaluation,
//! and the repeated-split benchmark protocol.
//!
//! Exit codes: 0 success, 1 invalid input (bad flags, unreadable or
//! inconsistent files), 2 solver non-convergence. Errors print one
//! machine-readable JSON line on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

mod commands;

use otp_core::Error;

/// Default regularization for the normalized cost matrix. Sharp transport
/// plans (small epsilon) are what make nearest-structure propagation work;
/// the value is exposed because no single choice suits every dataset.
pub const DEFAULT_EPSILON: f64 = 3e-4;

/// Default certainty threshold.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Parser)]
#[command(
    name = "otp",
    about = "Transductive label propagation through optimal transport",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate labels once and write predictions plus a trace.
    Run(RunArgs),
    /// Average NMI/ARI over repeated seeded splits, per labeled fraction.
    Bench(BenchArgs),
    /// Compare two prediction files and print NMI/ARI.
    Eval(EvalArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Input CSV (header row; one column carries the class labels).
    #[arg(long)]
    data: PathBuf,

    /// Name of the label column.
    #[arg(long = "label-col")]
    label_col: String,

    /// Entropic regularization applied to the max-normalized cost matrix.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,

    /// Certainty threshold in [0, 1].
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,

    /// Sinkhorn iteration cap.
    #[arg(long = "max-iterations", default_value_t = 200_000)]
    max_iterations: usize,

    /// L1 marginal feasibility tolerance.
    #[arg(long = "feasibility-tol", default_value_t = 1e-5)]
    feasibility_tol: f64,

    /// Skip feature standardization.
    #[arg(long = "no-standardize", action = ArgAction::SetTrue)]
    no_standardize: bool,

    /// Draw splits per class instead of uniformly.
    #[arg(long, default_value_t = true, action = ArgAction::Set, num_args = 0..=1,
          default_missing_value = "true")]
    stratified: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Reveal this fraction of true labels as the seed split. Without it the
    /// rows with empty label cells form the unlabeled set.
    #[arg(long = "labeled-fraction")]
    labeled_fraction: Option<f64>,

    /// Split seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Predictions CSV path.
    #[arg(long, default_value = "predictions.csv")]
    output: PathBuf,

    /// Trace JSON path (default: next to the predictions file).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated labeled fractions.
    #[arg(long, default_value = "0.05,0.15,0.25,0.35", value_delimiter = ',')]
    fractions: Vec<f64>,

    /// Splits per fraction; seeds run from --seed upward.
    #[arg(long, default_value_t = 10)]
    repeats: usize,

    /// Base split seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Also write the results table as CSV.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Worker threads for independent (fraction, seed) cells.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions CSV (needs row_index and predicted_label columns).
    #[arg(long)]
    predictions: PathBuf,

    /// Ground-truth CSV in the same format.
    #[arg(long)]
    truth: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap would exit 2 on its own; bad usage is an input error here
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Bench(args) => commands::bench(args),
        Command::Eval(args) => commands::eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = match err {
                Error::NotConverged { .. } => "not_converged",
                _ => "invalid_input",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": kind, "message": err.to_string() })
            );
            ExitCode::from(if kind == "not_converged" { 2 } else { 1 })
        }
    }
}
