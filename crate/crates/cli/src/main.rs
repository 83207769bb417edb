#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use commands::{bench_act, eval, gradcheck, infer, train};
use error::{CliError, CliResult};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// MTLU restoration networks: training, evaluation and verification.
#[derive(Debug, Parser)]
#[command(name = "mtlu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network from a config file plus key=value overrides.
    Train(train::TrainArgs),
    /// Report per-image PSNR of a checkpoint as CSV.
    Eval(eval::EvalArgs),
    /// Restore PNG images with a checkpoint.
    Infer(infer::InferArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
    /// Time activation forward (and backward) passes.
    BenchAct(bench_act::BenchActArgs),
}

/// `MTLU_THREADS` caps the worker pool; unset means one per core.
fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("MTLU_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::usage(format!(
            "MTLU_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Infer(a) => infer::run(a),
        Command::Gradcheck(a) => gradcheck::run(a),
        Command::BenchAct(a) => bench_act::run(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
