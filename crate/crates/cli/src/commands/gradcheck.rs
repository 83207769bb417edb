use clap::Args;
use mtlu_core::gradcheck::{self, GradcheckOptions, Scope, DEFAULT_SEEDS, TOLERANCE};

use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// all | ops | activations | network
    #[arg(long, default_value = "all")]
    pub scope: String,
    /// Random cases per check.
    #[arg(long, default_value_t = DEFAULT_SEEDS)]
    pub seeds: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = TOLERANCE)]
    pub tolerance: f64,
    /// Test hook: scale the analytic MTLU gradients by this factor.
    #[arg(long, hide = true)]
    pub corrupt_mtlu: Option<f64>,
}

pub fn run(args: &GradcheckArgs) -> CliResult<()> {
    let scope = Scope::parse(&args.scope)
        .ok_or_else(|| CliError::usage(format!("unknown scope `{}`", args.scope)))?;
    if args.seeds == 0 {
        return Err(CliError::usage("--seeds must be positive"));
    }
    let results = gradcheck::run(&GradcheckOptions {
        scope,
        seeds: args.seeds,
        tolerance: args.tolerance,
        corrupt_mtlu: args.corrupt_mtlu,
    })?;
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<_> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name)
        .collect();
    if failed.is_empty() {
        println!("{} checks passed", results.len());
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "gradient check failed: {}",
            failed.join(", ")
        )))
    }
}
