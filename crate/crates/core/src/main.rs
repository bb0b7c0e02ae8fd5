use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use influence_scan::pipeline::{self, Backend, RunConfig};
use influence_scan::{Level, Metric};

#[derive(Parser)]
#[command(
    name = "influence-scan",
    version,
    about = "Scan an author's passages for semantic overlap with their sources"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut every instance passage into segment JSONL files.
    Segment(RunArgs),
    /// Embed segments and score all candidate x reference pairs.
    Compare(RunArgs),
    /// Render heatmaps and pair reports from compare bundles.
    Report(RunArgs),
    /// segment + compare + report with the hash backend.
    Pipeline(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "sentence,ngram")]
    level: Vec<Level>,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    overlap: bool,
    #[arg(long, default_value = "hash")]
    backend: Backend,
    #[arg(long)]
    embx: Option<PathBuf>,
    /// Dimension of the hash embedder.
    #[arg(long, default_value_t = influence_scan::embed::DEFAULT_HASH_DIM)]
    hash_dim: usize,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    idf: bool,
    #[arg(long, default_value = "p")]
    metric: Metric,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
    #[arg(long, default_value_t = 6)]
    min_tokens: usize,
    #[arg(long, default_value_t = 0.9)]
    streak_quantile: f64,
    #[arg(long, default_value_t = 3)]
    diagonal_window: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl From<RunArgs> for RunConfig {
    fn from(a: RunArgs) -> Self {
        RunConfig {
            levels: a.level,
            n: a.n,
            overlap: a.overlap,
            backend: a.backend,
            embx_path: a.embx,
            hash_dim: a.hash_dim,
            idf: a.idf,
            metric: a.metric,
            top_k: a.top_k,
            min_tokens: a.min_tokens,
            streak_quantile: a.streak_quantile,
            diagonal_window: a.diagonal_window,
            seed: a.seed,
            ..RunConfig::new(a.manifest, a.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Segment(a) => {
            pipeline::cmd_segment(&a.into()).map(|c| log::info!("wrote {} segment files", c.len()))
        }
        Command::Compare(a) => {
            pipeline::cmd_compare(&a.into()).map(|c| log::info!("wrote {} bundles", c.len()))
        }
        Command::Report(a) => {
            pipeline::cmd_report(&a.into()).map(|r| log::info!("wrote {} reports", r.len()))
        }
        Command::Pipeline(a) => {
            pipeline::cmd_pipeline(&a.into()).map(|r| log::info!("wrote {} reports", r.len()))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
