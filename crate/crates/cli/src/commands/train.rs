use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use mtlu_core::data::{eval_benchmark, prepare, Dataset};
use mtlu_core::networks::{save_checkpoint, Network};
use mtlu_core::training::{train, StopReason, Validation};
use mtlu_core::Rng;

use crate::config::{ExperimentConfig, RawConfig};
use crate::error::{CliError, CliResult};

pub const CONFIG_ECHO: &str = "config.txt";
pub const CHECKPOINT: &str = "checkpoint.mtlu";
pub const TRAIN_LOG: &str = "train_log.txt";
pub const EVAL_CSV: &str = "eval.csv";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// `key=value` overrides applied after the config file.
    pub overrides: Vec<String>,
}

fn io_err(what: &str, path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("cannot {what} {}: {e}", path.display()))
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let mut raw = RawConfig::default();
    if let Some(p) = &args.config {
        raw.apply_file(p)?;
    }
    raw.apply_overrides(&args.overrides)?;
    let cfg = ExperimentConfig::from_raw(&raw)?;

    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| io_err("create", out, e))?;
    let echo = out.join(CONFIG_ECHO);
    fs::write(&echo, raw.to_text()).map_err(|e| io_err("write", &echo, e))?;

    let train_images = cfg.data.load()?;
    let dataset = Dataset::new(&train_images, cfg.degradation)?;
    // Patch geometry is a config property; reject it before any work.
    dataset
        .sample_patches::<f32>(&mut Rng::new(0), 1, cfg.train.patch)
        .map_err(|e| CliError::usage(format!("`train.patch`: {e}")))?;
    let eval_images = cfg.eval.load()?;
    let val_pairs = prepare(&eval_images, cfg.degradation, cfg.eval_noise_seed)?;
    let validation = (cfg.train.val_every > 0).then(|| Validation {
        pairs: &val_pairs,
        degradation: cfg.degradation,
    });

    let mut net: Network<f32> = Network::build(cfg.net, &mut Rng::new(cfg.train.seed).fork(0))?;
    println!(
        "training {} depth={} width={} af={} params={}",
        cfg.net.task.name(),
        cfg.net.depth,
        cfg.net.width,
        cfg.net.activation,
        net.param_count()
    );
    let log_path = out.join(TRAIN_LOG);
    let mut log =
        BufWriter::new(File::create(&log_path).map_err(|e| io_err("create", &log_path, e))?);
    let mut log_err = None;
    let report = train(&mut net, &dataset, &cfg.train, validation, |r| {
        println!("{r}");
        if let Err(e) = writeln!(log, "{r}") {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(io_err("write", &log_path, e));
    }
    log.flush().map_err(|e| io_err("write", &log_path, e))?;

    let ckpt = out.join(CHECKPOINT);
    crate::error::with_path(save_checkpoint(&net, &ckpt), &ckpt)?;
    if let StopReason::NonFinite { iter, what } = &report.stop {
        return Err(CliError::Numeric(format!(
            "non-finite value in {what} at iteration {iter}; last good checkpoint written to {}",
            ckpt.display()
        )));
    }
    println!(
        "stopped after {} iterations ({:?})",
        report.iterations, report.stop
    );

    let eval = eval_benchmark(&net, &eval_images, cfg.degradation, cfg.eval_noise_seed)?;
    let csv = out.join(EVAL_CSV);
    super::eval::write_report(&eval, &csv)?;
    super::eval::print_summary(&eval);
    Ok(())
}
