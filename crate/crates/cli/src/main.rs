//! `hetgfl`: train, evaluate, cluster, and export heterogeneous-graph
//! node representations.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error. Logging level
//! comes from `HETGFL_LOG` (error, info or debug).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use hetgfl::model::{AggMode, LossMode};

#[derive(Parser)]
#[command(name = "hetgfl", version, about = "Heterogeneous graph learning with edge-type filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, history and metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint: micro/macro F1 per split.
    Eval(EvalArgs),
    /// K-means over learned embeddings, scored by ARI and NMI.
    Cluster(ClusterArgs),
    /// Write one embedding row per node as TSV.
    ExportEmbeddings(ExportArgs),
    /// Generate a planted-partition dataset directory.
    Synth(SynthArgs),
}

fn parse_agg(s: &str) -> Result<AggMode, String> {
    AggMode::from_str(s)
}

fn parse_loss(s: &str) -> Result<LossMode, String> {
    LossMode::from_str(s)
}

/// How the labeled nodes are split when the dataset carries no split.tsv.
#[derive(Debug, Clone, Copy)]
pub enum SplitMode {
    /// 24% train, 6% validation, 70% test.
    Standard,
    /// 3% train for clustering experiments (6% validation, 91% test).
    ThreePercent,
}

impl SplitMode {
    pub fn fractions(self) -> (f64, f64, f64) {
        match self {
            SplitMode::Standard => (0.24, 0.06, 0.70),
            SplitMode::ThreePercent => (0.03, 0.06, 0.91),
        }
    }
}

fn parse_split_mode(s: &str) -> Result<SplitMode, String> {
    match s {
        "standard" => Ok(SplitMode::Standard),
        "three-percent" => Ok(SplitMode::ThreePercent),
        other => Err(format!(
            "unknown split mode `{other}` (expected standard or three-percent)"
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSel {
    Train,
    Val,
    Test,
    All,
}

fn parse_split_sel(s: &str) -> Result<SplitSel, String> {
    match s {
        "train" => Ok(SplitSel::Train),
        "val" => Ok(SplitSel::Val),
        "test" => Ok(SplitSel::Test),
        "all" => Ok(SplitSel::All),
        other => Err(format!(
            "unknown split `{other}` (expected train, val, test or all)"
        )),
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset directory (node.tsv, edge.tsv, label.tsv, optional split.tsv).
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoint, history, metrics and manifest.
    #[arg(long, default_value = "hetgfl_out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    /// Width of every layer (d0 through dL).
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Width of the edge-type embedding rows.
    #[arg(long, default_value_t = 64)]
    pub edge_dim: usize,
    /// plain-sum, node-residual or edge-residual.
    #[arg(long, default_value = "edge-residual", value_parser = parse_agg)]
    pub agg: AggMode,
    /// Attention blend factor for edge-residual aggregation.
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// softmax-ce (single-label) or sigmoid-bce (multi-label).
    #[arg(long, default_value = "softmax-ce", value_parser = parse_loss)]
    pub loss: LossMode,
    #[arg(long, default_value_t = 0.01)]
    pub leaky_slope: f64,
    /// Disable a component: no-fgl, no-l2, no-nle or no-ei. Repeatable.
    #[arg(long = "ablate")]
    pub ablate: Vec<String>,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    /// Penalize the unsquared parameter norm instead of the squared one.
    #[arg(long)]
    pub unsquared_penalty: bool,
    #[arg(long, default_value_t = 5e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 30)]
    pub patience: usize,
    /// Master seed; split, init and k-means seeds derive from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// standard (24/6/70) or three-percent (3/6/91); ignored when the
    /// dataset ships a split.tsv.
    #[arg(long, default_value = "standard", value_parser = parse_split_mode)]
    pub split_mode: SplitMode,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// train, val, test or all.
    #[arg(long, default_value = "all", value_parser = parse_split_sel)]
    pub split: SplitSel,
    /// Also report the literal printed F1 formulas.
    #[arg(long)]
    pub paper_literal_f1: bool,
    /// Optional file to write the metrics JSON to.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "hetgfl_out")]
    pub out: PathBuf,
    /// Cluster count; defaults to the dataset's class count.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Overrides the derived k-means seed.
    #[arg(long)]
    pub kmeans_seed: Option<u64>,
    /// Cluster the pre-normalization representations instead.
    #[arg(long)]
    pub raw_representation: bool,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
}

#[derive(Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output TSV path: node id, then the embedding row.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Directory to write node.tsv, edge.tsv and label.tsv into.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub node_types: usize,
    #[arg(long, default_value_t = 4)]
    pub edge_types: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Probability that an intra-class edge carries its class's edge type.
    #[arg(long, default_value_t = 0.9)]
    pub homophily: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HETGFL_LOG", "error")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => commands::cmd_train(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Cluster(args) => commands::cmd_cluster(args),
        Command::ExportEmbeddings(args) => commands::cmd_export_embeddings(args),
        Command::Synth(args) => commands::cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
