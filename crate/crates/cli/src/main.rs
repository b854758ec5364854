//! Command-line pipeline for grid-fault classification and attribution:
//! generate synthetic scenarios, train classifiers, run the stratified
//! cross-validation protocol, and produce per-sample attribution reports.
//! All outputs are plot-ready JSON; all randomness flows from `--seed`.

mod cmds;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridfault::attrib::BaselineKind;
use gridfault::evalkit::ModelKind;

pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// A failed command: the exit code plus a machine-readable error record
/// printed to stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub record: serde_json::Value,
}

#[derive(Parser)]
#[command(name = "gridfault", version, about)]
struct Cli {
    /// Cap on parallel worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic fault dataset from a scenario file.
    Generate(GenerateArgs),
    /// Select hyperparameters, fit one model and save it with its
    /// normalization statistics.
    Train(TrainArgs),
    /// Stratified k-fold evaluation of one or more model families.
    Crossval(CrossvalArgs),
    /// Integrated-Gradients attribution reports for selected samples.
    Attribute(AttributeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario description (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV path; a .meta.json sidecar records the ground truth.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed recorded in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Input dataset (CSV in the canonical column layout).
    #[arg(long)]
    data: PathBuf,
    /// ridge | logistic | linear-svm | rbf-svm | mlp
    #[arg(long)]
    model: ModelKind,
    #[arg(long, default_value = "model.json")]
    out_model: PathBuf,
    #[arg(long, default_value = "eval.json")]
    out_eval: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random-search trials (MLP only).
    #[arg(long, default_value_t = 200)]
    budget: usize,
    /// Epoch cap for MLP training.
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    /// Epoch count for the SVM subgradient fitters.
    #[arg(long, default_value_t = 60)]
    svm_epochs: usize,
}

#[derive(Args)]
struct CrossvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated model kinds to evaluate.
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<ModelKind>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Summary table (one row per model, results-table layout).
    #[arg(long, default_value = "table.json")]
    out: PathBuf,
    /// Optional per-fold detail file.
    #[arg(long)]
    detail: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    budget: usize,
    #[arg(long, default_value_t = 500)]
    max_epochs: usize,
    #[arg(long, default_value_t = 60)]
    svm_epochs: usize,
}

#[derive(Args)]
struct AttributeArgs {
    /// Model bundle produced by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// all-tp | all-fn | top-confidence:N | id:3,17,42
    #[arg(long, default_value = "all-tp")]
    select: cmds::Selector,
    /// zero | mean | random
    #[arg(long, default_value = "mean")]
    baseline: String,
    /// Step count, or "auto" to sweep (25, 50, 100, 200) against --tol.
    #[arg(long, default_value = "auto")]
    m: String,
    /// Completeness tolerance for --m auto.
    #[arg(long, default_value_t = 1e-2)]
    tol: f64,
    /// Class the attributions explain: fault | nonfault
    #[arg(long, default_value = "fault")]
    target: String,
    #[arg(long, default_value = "attributions.json")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .ok(); // a second initialization in-process is harmless
    }
    match cli.command {
        Command::Generate(a) => cmds::cmd_generate(&a.scenario, &a.out, a.seed),
        Command::Train(a) => cmds::cmd_train(
            &a.data,
            a.model,
            &a.out_model,
            &a.out_eval,
            a.seed,
            a.budget,
            a.max_epochs,
            a.svm_epochs,
        ),
        Command::Crossval(a) => cmds::cmd_crossval(
            &a.data,
            &a.models,
            a.k,
            a.seed,
            &a.out,
            a.detail.as_deref(),
            a.budget,
            a.max_epochs,
            a.svm_epochs,
        ),
        Command::Attribute(a) => {
            let baseline = match a.baseline.as_str() {
                "zero" => BaselineKind::Zero,
                "mean" => BaselineKind::Mean,
                "random" => BaselineKind::Random,
                other => {
                    return Err(cmds::data_err(
                        format!("unknown baseline {other:?}"),
                        "usage",
                        None,
                    ))
                }
            };
            let target = match a.target.as_str() {
                "fault" => 1,
                "nonfault" => 0,
                other => {
                    return Err(cmds::data_err(
                        format!("unknown target {other:?}"),
                        "usage",
                        None,
                    ))
                }
            };
            cmds::cmd_attribute(
                &a.model, &a.data, &a.select, baseline, &a.m, a.tol, target, &a.out, a.seed,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // unknown flags/commands exit 2 via clap
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record);
            ExitCode::from(e.code)
        }
    }
}
