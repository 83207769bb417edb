use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use mtlu_core::activations::{
    ActivationSpec, DEFAULT_BINS, DEFAULT_BIN_WIDTH, DEFAULT_PLF_INTERVAL,
};
use mtlu_core::timing::{bench_activation, csv_header, csv_row, ActivationBench, DEFAULT_WARMUP};
use mtlu_core::Shape;

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct BenchActArgs {
    /// Comma-separated activations: relu, prelu, maxout, mtlu[:bins[:width]],
    /// apl[:kernels], plf[:segments[:interval]].
    #[arg(long, default_value = "relu,prelu,maxout,mtlu:40,apl:5,plf:40")]
    pub af: String,
    /// Tensor shape `N,C,H,W`; the default holds 2^22 elements.
    #[arg(long, default_value = "16,64,64,64")]
    pub shape: String,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: usize,
    /// Also time the backward pass.
    #[arg(long)]
    pub backward: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<T> {
    s.parse()
        .map_err(|_| CliError::usage(format!("invalid {what} `{s}`")))
}

pub fn parse_af(s: &str) -> CliResult<ActivationSpec> {
    let mut parts = s.trim().split(':');
    let kind = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let arity = |max: usize| {
        if args.len() > max {
            Err(CliError::usage(format!("too many parameters in `{s}`")))
        } else {
            Ok(())
        }
    };
    let spec = match kind {
        "relu" | "prelu" | "maxout" => {
            arity(0)?;
            match kind {
                "relu" => ActivationSpec::Relu,
                "prelu" => ActivationSpec::Prelu,
                _ => ActivationSpec::Maxout,
            }
        }
        "mtlu" => {
            arity(2)?;
            ActivationSpec::mtlu(
                args.first()
                    .map_or(Ok(DEFAULT_BINS), |v| num(v, "bin count"))?,
                args.get(1)
                    .map_or(Ok(DEFAULT_BIN_WIDTH), |v| num(v, "bin width"))?,
            )
        }
        "apl" => {
            arity(1)?;
            ActivationSpec::Apl {
                kernels: args.first().map_or(Ok(5), |v| num(v, "kernel count"))?,
            }
        }
        "plf" => {
            arity(2)?;
            ActivationSpec::Plf {
                segments: args.first().map_or(Ok(40), |v| num(v, "segment count"))?,
                interval: args
                    .get(1)
                    .map_or(Ok(DEFAULT_PLF_INTERVAL), |v| num(v, "interval"))?,
            }
        }
        other => return Err(CliError::usage(format!("unknown activation `{other}`"))),
    };
    spec.validate()
        .map_err(|e| CliError::usage(format!("{s}: {e}")))?;
    Ok(spec)
}

pub fn parse_shape(s: &str) -> CliResult<Shape> {
    let dims: Vec<usize> = s
        .split(',')
        .map(|d| num(d.trim(), "dimension"))
        .collect::<CliResult<_>>()?;
    match dims[..] {
        [n, c, h, w] if n * c * h * w > 0 => Ok(Shape::new(n, c, h, w)),
        _ => Err(CliError::usage(format!(
            "shape `{s}` must be four positive N,C,H,W"
        ))),
    }
}

pub fn run(args: &BenchActArgs) -> CliResult<()> {
    let shape = parse_shape(&args.shape)?;
    let specs: Vec<ActivationSpec> = args.af.split(',').map(parse_af).collect::<CliResult<_>>()?;
    if args.repeats == 0 {
        return Err(CliError::usage("--repeats must be positive"));
    }
    let mut lines = vec![csv_header(args.backward).to_string()];
    for spec in specs {
        let t = bench_activation(&ActivationBench {
            spec,
            shape,
            repeats: args.repeats,
            warmup: args.warmup,
            backward: args.backward,
            seed: args.seed,
        })?;
        eprintln!("{}: median {:.3} ms", t.label, t.forward.median_ms);
        lines.push(csv_row(&t));
    }
    let text = lines.join("\n") + "\n";
    match &args.out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::usage(format!("cannot write output: {e}"))),
    }
}
