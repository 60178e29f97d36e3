//! `tactus`: train models, simulate performances, transcribe them back into
//! quantized scores, and measure how well that went.
//!
//! Exit codes: 0 success, 1 internal invariant violation (a bug), 2 bad
//! input or unusable files.

mod common;
mod config;
mod evaluate;
mod fit_perf;
mod optimize;
mod simulate;
mod train;
mod transcribe;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "tactus", version, about = "Note-value transcription toolkit")]
struct Cli {
    /// Seed override for commands that sample.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for piece-parallel stages; 0 means all cores.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// JSON pipeline configuration; command flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the context tree, interdependence family, and metrical models
    /// from a directory of score TSVs.
    Train(train::TrainArgs),
    /// Fit the duration model on aligned performances with ground truth.
    FitPerf(fit_perf::FitPerfArgs),
    /// Grid-search the decoder weights on held-out data.
    OptimizeWeights(optimize::OptimizeArgs),
    /// Quantize one performance (.mid or performance TSV) into a score.
    Transcribe(transcribe::TranscribeArgs),
    /// Compare estimated scores against references.
    Evaluate(evaluate::EvaluateArgs),
    /// Render score TSVs into synthetic performances with alignments.
    Simulate(simulate::SimulateArgs),
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let threads = if cli.jobs == 0 { num_threads_all() } else { cli.jobs };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .expect("thread pool built once");
    let cfg = config::PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Train(args) => train::run(args, &cfg),
        Command::FitPerf(args) => fit_perf::run(args, &cfg),
        Command::OptimizeWeights(args) => optimize::run(args, &cfg),
        Command::Transcribe(args) => transcribe::run(args, &cfg),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Simulate(args) => simulate::run(args, cli.seed),
    }
}

fn num_threads_all() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    match std::panic::catch_unwind(run) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => {
            // The panic hook has already printed the message.
            eprintln!("internal error: invariant violated");
            ExitCode::from(1)
        }
    }
}
