//! `mosfuse` — train/predict/evaluate/pipeline workflows over MOS score
//! tables, with a seeded synthetic generator for end-to-end runs.
//!
//! Exit codes are a stable scripting contract:
//!   0 success, 2 usage, 3 I/O failure, 4 data validation, 5 training or
//!   numerical failure.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "mosfuse", version, about = "MOS score-fusion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalOpts,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
struct GlobalOpts {
    /// Seed for everything that draws randomness.
    #[arg(long, global = true, env = "MOSFUSE_SEED", default_value_t = 0)]
    seed: u64,
    /// Clamp predictions (and pseudo-labels) into [1, 5].
    #[arg(long, global = true, default_value_t = false)]
    clamp: bool,
    /// Training loss for gradient-trained fusers.
    #[arg(long, global = true, default_value = "l1", value_parser = ["l1", "l2"])]
    loss: String,
    /// Suppress the per-run summary lines on stdout.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (labels + subsystem scores).
    Synth(SynthArgs),
    /// Fit a fusion model and save it.
    Train(TrainArgs),
    /// Predict MOS for a score (or feature) table with a saved model.
    Predict(PredictArgs),
    /// Compute the 8 challenge metrics for an answer file against labels.
    Evaluate(EvaluateArgs),
    /// Pseudo-label an unlabeled score table with a model + calibration.
    PseudoLabel(PseudoLabelArgs),
    /// Run the 4-step semi-supervised out-of-domain pipeline.
    OodPipeline(OodPipelineArgs),
}

#[derive(Debug, Clone, Args, serde::Serialize)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of synthesis systems (default: 151 main / 26 ood).
    #[arg(long)]
    systems: Option<usize>,
    /// Utterances per system in main mode.
    #[arg(long, default_value_t = 40)]
    utts_per_system: usize,
    /// Number of subsystem score columns.
    #[arg(long, default_value_t = 7)]
    subsystems: usize,
    /// Generate the out-of-domain suite (labeled/unlabeled/held-out).
    #[arg(long, default_value_t = false)]
    ood: bool,
    /// Additive domain shift on subsystem scores in --ood mode.
    #[arg(long, default_value_t = 0.4)]
    ood_shift: f64,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
struct TrainArgs {
    /// voting | weighted_voting | linear_regression (alias: ols) |
    /// proposed_fuser | mlp | gbdt | feature_regression | aux_fuser
    #[arg(long)]
    method: String,
    #[arg(long)]
    train_labels: PathBuf,
    #[arg(long)]
    train_scores: Option<PathBuf>,
    #[arg(long)]
    val_labels: Option<PathBuf>,
    #[arg(long)]
    val_scores: Option<PathBuf>,
    /// Feature table (required for feature_regression, optional for gbdt).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Auxiliary per-utterance column, e.g. a character error rate.
    #[arg(long)]
    aux: Option<PathBuf>,
    /// Auxiliary values for the explicit validation set.
    #[arg(long)]
    val_aux: Option<PathBuf>,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 10_000)]
    max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    /// Map the aux column through ln(1 + aux); remembered by the model.
    #[arg(long, default_value_t = false)]
    aux_log1p: bool,
    /// Ridge strength for feature_regression.
    #[arg(long, default_value_t = 1e-3)]
    ridge_lambda: f64,
    #[arg(long, default_value_t = 200)]
    gbdt_trees: usize,
    #[arg(long, default_value_t = 3)]
    gbdt_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    gbdt_shrinkage: f64,
    #[arg(long, default_value_t = 5)]
    gbdt_min_leaf: usize,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Apply a saved per-subsystem calibration before predicting
    /// (pipeline systems b/c are fit on calibrated scores).
    #[arg(long)]
    calibration: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    aux: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Snap predictions to the 0.125 MOS grid before writing.
    #[arg(long, default_value_t = false)]
    quantize: bool,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
struct EvaluateArgs {
    /// Answer file (headerless `utterance_id,score`).
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "text", value_parser = ["text", "csv"])]
    format: String,
    /// Also write the report here (plus a config sidecar).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
struct PseudoLabelArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    calibration: PathBuf,
    #[arg(long)]
    unlabeled_scores: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
struct OodPipelineArgs {
    #[arg(long)]
    main_train_labels: PathBuf,
    #[arg(long)]
    main_train_scores: PathBuf,
    #[arg(long)]
    ood_labeled_labels: PathBuf,
    #[arg(long)]
    ood_labeled_scores: PathBuf,
    #[arg(long)]
    ood_unlabeled_scores: PathBuf,
    #[arg(long)]
    method: String,
    #[arg(long)]
    out_dir: PathBuf,
    /// Relative weight of pseudo-labeled rows in step 4.
    #[arg(long, default_value_t = 1.0)]
    pseudo_weight: f64,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 10_000)]
    max_epochs: usize,
    #[arg(long, default_value_t = 20)]
    patience: usize,
}

/// Error carrying the exit code contract.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<mosfuse::io::IoError> for CliError {
    fn from(e: mosfuse::io::IoError) -> Self {
        let code = match &e {
            mosfuse::io::IoError::Os { .. } => 3,
            _ => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<mosfuse::data::DataError> for CliError {
    fn from(e: mosfuse::data::DataError) -> Self {
        CliError { code: 4, message: e.to_string() }
    }
}

impl From<mosfuse::metrics::MetricError> for CliError {
    fn from(e: mosfuse::metrics::MetricError) -> Self {
        CliError { code: 4, message: e.to_string() }
    }
}

impl From<mosfuse::fusers::FuserError> for CliError {
    fn from(e: mosfuse::fusers::FuserError) -> Self {
        use mosfuse::fusers::FuserError as F;
        let code = match &e {
            F::InvalidConfig(_) | F::UnsupportedMethod { .. } => 2,
            F::NonFiniteGradient | F::SingularSystem | F::NonFiniteLoss => 5,
            _ => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<mosfuse::semisup::PipelineError> for CliError {
    fn from(e: mosfuse::semisup::PipelineError) -> Self {
        match e {
            mosfuse::semisup::PipelineError::Fuser(f) => f.into(),
            mosfuse::semisup::PipelineError::Data(d) => d.into(),
            mosfuse::semisup::PipelineError::InvalidWeight => {
                CliError::usage("pseudo-weight must be finite and >= 0")
            }
            other => CliError { code: 4, message: other.to_string() },
        }
    }
}

impl From<mosfuse::synth::SynthError> for CliError {
    fn from(e: mosfuse::synth::SynthError) -> Self {
        match e {
            mosfuse::synth::SynthError::InvalidConfig(m) => CliError::usage(m),
            mosfuse::synth::SynthError::Data(d) => d.into(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => commands::run_synth(&args, &cli.global),
        Command::Train(args) => commands::run_train(&args, &cli.global),
        Command::Predict(args) => commands::run_predict(&args, &cli.global),
        Command::Evaluate(args) => commands::run_evaluate(&args, &cli.global),
        Command::PseudoLabel(args) => commands::run_pseudo_label(&args, &cli.global),
        Command::OodPipeline(args) => commands::run_ood_pipeline(&args, &cli.global),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
