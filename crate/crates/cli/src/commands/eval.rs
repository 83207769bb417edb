use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::Args;
use mtlu_core::data::{eval_benchmark, format_db, Degradation, EvalReport};
use mtlu_core::networks::{load_checkpoint, Network, Task};

use crate::config::ImageSource;
use crate::error::{with_path, CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory of PNG images; defaults to the synthetic evaluation corpus.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Expected task (`sr` or `denoise`); checked against the checkpoint.
    #[arg(long)]
    pub task: Option<String>,
    /// Expected SR factor; checked against the checkpoint.
    #[arg(long)]
    pub factor: Option<usize>,
    /// Denoise noise sigma on the 0-255 scale.
    #[arg(long, default_value_t = 25.0)]
    pub sigma: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Synthetic corpus size when `--images` is absent.
    #[arg(long, default_value_t = 20)]
    pub synthetic_count: usize,
    /// Report CSV.
    #[arg(long, default_value = "eval.csv")]
    pub out: PathBuf,
}

pub fn load_net(path: &Path) -> CliResult<Network<f32>> {
    if !path.exists() {
        return Err(CliError::usage(format!(
            "checkpoint not found: {}",
            path.display()
        )));
    }
    with_path(load_checkpoint(path), path)
}

pub fn write_report(report: &EvalReport, path: &Path) -> CliResult<()> {
    let f = File::create(path)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?;
    with_path(report.write_csv(BufWriter::new(f)), path)
}

pub fn print_summary(report: &EvalReport) {
    println!(
        "images={} mean_psnr_db={} baseline_db={}",
        report.rows.len(),
        format_db(report.mean_psnr),
        format_db(report.mean_baseline)
    );
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let net = load_net(&args.checkpoint)?;
    let task = net.spec().task;
    if let Some(want) = &args.task {
        if want != task.name() {
            return Err(CliError::Check(format!(
                "checkpoint is a {} network, not {want}",
                task.name()
            )));
        }
    }
    let degradation = match task {
        Task::SuperResolution { factor } => {
            if args.factor.is_some_and(|f| f != factor) {
                return Err(CliError::Check(format!(
                    "checkpoint upscales x{factor}, not x{}",
                    args.factor.unwrap_or_default()
                )));
            }
            Degradation::Bicubic { factor }
        }
        Task::Denoise => {
            if !(args.sigma >= 0.0) {
                return Err(CliError::usage("--sigma must be non-negative"));
            }
            Degradation::Awgn { sigma: args.sigma }
        }
    };
    let source = match &args.images {
        Some(d) => ImageSource::Dir(d.clone()),
        None => ImageSource::Synthetic(mtlu_core::data::SyntheticSpec::new(
            args.synthetic_count,
            96,
            200,
        )),
    };
    let images = source.load()?;
    let report = eval_benchmark(&net, &images, degradation, args.seed)?;
    write_report(&report, &args.out)?;
    print_summary(&report);
    Ok(())
}
