mod commands;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use glsp_core::graph::Suppression;
use glsp_core::pipeline::JunctionMode;

/// Floor plan line segment parsing with a graph attention network.
#[derive(Parser)]
#[command(name = "glsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of annotations, rasters and heatmaps.
    Gen(GenArgs),
    /// Train the GNN on a generated dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Parse one raster (or annotation) into classified segments.
    Parse(ParseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuppressionArg {
    Nss,
    Nds,
}

impl From<SuppressionArg> for Suppression {
    fn from(s: SuppressionArg) -> Self {
        match s {
            SuppressionArg::Nss => Suppression::Nss,
            SuppressionArg::Nds => Suppression::Nds,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum JunctionArg {
    Oracle,
    Detected,
}

impl From<JunctionArg> for JunctionMode {
    fn from(j: JunctionArg) -> Self {
        match j {
            JunctionArg::Oracle => JunctionMode::Oracle,
            JunctionArg::Detected => JunctionMode::Detected,
        }
    }
}

/// Pipeline flags shared by train, eval and parse.
#[derive(Args, Clone, Default)]
struct PipelineArgs {
    #[arg(long, value_enum)]
    suppression: Option<SuppressionArg>,
    #[arg(long, value_parser = ["3", "5", "7"])]
    nms_kernel: Option<String>,
    #[arg(long, value_enum)]
    junctions: Option<JunctionArg>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint path; the loss log and config echo are written beside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    pk: Option<OnOff>,
    #[arg(long)]
    steps: Option<u64>,
    /// Start from this checkpoint instead of a fresh initialisation.
    #[arg(long)]
    init: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Report path; PR curves and the config echo are written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated line thresholds, e.g. `8,16,32`.
    #[arg(long)]
    thresholds: Option<String>,
    /// Score the ground truth itself instead of model predictions.
    #[arg(long)]
    gt_as_predictions: bool,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct ParseArgs {
    /// A raster (`GLSPRAST`) or an annotation (`.json`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Junction heatmap for a raster input; defaults to the input path with
    /// a `.heat` extension.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Parse(a) => commands::parse(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
