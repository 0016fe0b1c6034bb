//! The `gqe` command line: ingest, sample, train, eval, answer and
//! oracle-check over on-disk graph, dataset and checkpoint directories.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 property
//! violation (oracle-check mismatch).

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::GqeError;
pub use commands::{
    answer_lines, resolve_checkpoint, CHECKPOINT_FILE, SUMMARY_FILE, TRAIN_LOG_FILE,
};
use config::ConfigValues;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gqe", version, about = "Embed and answer conjunctive graph queries")]
pub struct Cli {
    /// INI-style configuration file; command-line flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Run seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a typed graph from TSV files or generate a synthetic one.
    Ingest(IngestArgs),
    /// Split edges and sample train/valid/test query datasets.
    Sample(SampleArgs),
    /// Train a model, or build the exact one-hot parameters.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Rank the nodes answering one query.
    Answer(AnswerArgs),
    /// Check exact-mode scores against the set-semantics oracle.
    OracleCheck(OracleCheckArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Sample(_) => "sample",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Answer(_) => "answer",
            Command::OracleCheck(_) => "oracle-check",
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct IngestArgs {
    /// Edge file: `head<TAB>relation<TAB>tail` per line.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Node type file: `node<TAB>type` per line.
    #[arg(long)]
    pub node_types: Option<PathBuf>,
    /// Optional feature file: `node<TAB>space-separated indices` per line.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Generate instead of reading files: `blocks:K,N,p[,R[,C]]` or `random:N,R,T,p`.
    #[arg(long, value_name = "SPEC")]
    pub synthetic: Option<String>,
    /// Drop relations with fewer base edges than this.
    #[arg(long)]
    pub min_relation_edges: Option<usize>,
    /// Output graph directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SampleArgs {
    /// Graph directory written by `gqe ingest`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Output dataset directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fraction of base edges held out (default 0.1).
    #[arg(long)]
    pub split_fraction: Option<f64>,
    /// Training queries per structure (default 10000).
    #[arg(long)]
    pub train: Option<usize>,
    /// Validation queries per structure (default 500).
    #[arg(long)]
    pub valid: Option<usize>,
    /// Test queries per structure (default 1000).
    #[arg(long)]
    pub test: Option<usize>,
    /// Negative pool cap per example (default 1000).
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Graph whose non-members supply test standard negatives: full | train.
    #[arg(long)]
    pub test_negatives: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    /// Graph directory written by `gqe ingest`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Dataset directory written by `gqe sample` (required in learned mode).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output checkpoint directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// bilinear | distmult | transe (default bilinear).
    #[arg(long)]
    pub variant: Option<String>,
    /// Intersection aggregator: min | mean (default min).
    #[arg(long)]
    pub psi: Option<String>,
    /// learned | exact (default learned).
    #[arg(long)]
    pub mode: Option<String>,
    /// full | edge-only (default full).
    #[arg(long)]
    pub stages: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub chain1_weight: Option<f64>,
    #[arg(long)]
    pub path_weight: Option<f64>,
    #[arg(long)]
    pub intersection_weight: Option<f64>,
    #[arg(long)]
    pub validation_interval: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub max_stage1_batches: Option<usize>,
    #[arg(long)]
    pub max_stage2_batches: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mirror_hard_negatives: Option<bool>,
    /// Retrain even when the checkpoint is up to date.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Checkpoint file, or a directory holding `model.ckpt`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// train | valid | test (default test).
    #[arg(long)]
    pub split: Option<String>,
    /// standard | hard | both (default both).
    #[arg(long)]
    pub negatives: Option<String>,
    /// Count chain1 as a macro-average cell (default true).
    #[arg(long)]
    pub include_chain1: Option<bool>,
    /// Score with the edge-wise enumeration baseline instead of GQE;
    /// only queries without bound variables are evaluated.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub baseline: Option<bool>,
    /// Write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-example ranks as CSV here.
    #[arg(long)]
    pub ranks: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct AnswerArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Query JSON, a path to a file holding it, or `-` for standard input.
    #[arg(long)]
    pub query: Option<String>,
    /// Rows to print (default 10).
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct OracleCheckArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Check this checkpoint instead of freshly built exact parameters.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Queries sampled per catalog structure (default 100).
    #[arg(long)]
    pub queries: Option<usize>,
    /// Write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &GqeError) -> i32 {
    match e {
        GqeError::Argument(_) | GqeError::MissingInput { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. Output goes to `out`; errors and diagnostics to
/// standard error.
pub fn run_with<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(mut cli: Cli, out: &mut dyn std::io::Write) -> crate::Result<i32> {
    let mut cfg = match &cli.config {
        Some(path) => ConfigValues::load(path, cli.command.name())?,
        None => ConfigValues::default(),
    };
    cfg.fill("seed", &mut cli.seed)?;
    cfg.fill("threads", &mut cli.threads)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(GqeError::Argument("--threads must be >= 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let seed = cli.seed.unwrap_or(0);
    match &mut cli.command {
        Command::Ingest(a) => commands::ingest(a, &mut cfg, seed, out),
        Command::Sample(a) => commands::sample(a, &mut cfg, seed, out),
        Command::Train(a) => commands::train(a, &mut cfg, seed, out),
        Command::Eval(a) => commands::eval(a, &mut cfg, seed, out),
        Command::Answer(a) => commands::answer(a, &mut cfg, out),
        Command::OracleCheck(a) => commands::oracle_check(a, &mut cfg, seed, out),
    }
}

/// Entry point of the `gqe` binary.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_with(std::env::args_os(), &mut lock)
}
