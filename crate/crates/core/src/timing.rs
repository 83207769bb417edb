//! Wall-clock measurement of activation forward (and backward) passes.

use std::time::Instant;

use crate::activations::{Activation, ActivationSpec};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tape::Tape;
use crate::tensor::{Shape, Tensor};

pub const DEFAULT_WARMUP: usize = 3;

/// Summary of repeated timings, in milliseconds.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingStats {
    pub median_ms: f64,
    /// Interquartile range.
    pub iqr_ms: f64,
    pub min_ms: f64,
    pub samples: usize,
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no timing samples"));
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(TimingStats {
            median_ms: quantile(&s, 0.5),
            iqr_ms: quantile(&s, 0.75) - quantile(&s, 0.25),
            min_ms: s[0],
            samples: s.len(),
        })
    }
}

/// Runs `f` `warmup` times untimed, then `repeats` times timed.
pub fn time_repeated(
    warmup: usize,
    repeats: usize,
    mut f: impl FnMut() -> Result<()>,
) -> Result<TimingStats> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be positive"));
    }
    for _ in 0..warmup {
        f()?;
    }
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    TimingStats::from_samples(&samples)
}

#[derive(Clone, Debug)]
pub struct ActivationBench {
    pub spec: ActivationSpec,
    pub shape: Shape,
    pub repeats: usize,
    pub warmup: usize,
    /// Also time the backward pass.
    pub backward: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationTiming {
    pub label: String,
    pub forward: TimingStats,
    pub backward: Option<TimingStats>,
}

/// Random activation parameters so no branch is trivially predictable.
fn perturbed(spec: &ActivationSpec, channels: usize, rng: &mut Rng) -> Result<Activation<f32>> {
    let mut act = spec.instantiate::<f32>(channels)?;
    for t in act.params_mut() {
        for v in t.data_mut() {
            *v += 0.1 * rng.normal() as f32;
        }
    }
    Ok(act)
}

/// Times one activation on an f32 tensor of `bench.shape` drawn from N(0, 1).
pub fn bench_activation(bench: &ActivationBench) -> Result<ActivationTiming> {
    let mut rng = Rng::new(bench.seed);
    let x = Tensor::<f32>::randn(bench.shape, &mut rng, 0.0, 1.0)?;
    let act = perturbed(&bench.spec, bench.shape.c, &mut rng)?;
    let forward = time_repeated(bench.warmup, bench.repeats, || {
        std::hint::black_box(act.forward(std::hint::black_box(&x))?);
        Ok(())
    })?;
    let backward = if bench.backward {
        let out_shape = act.forward(&x)?.shape();
        let seed = Tensor::<f32>::randn(out_shape, &mut rng, 0.0, 1.0)?.into_data();
        Some(time_repeated(bench.warmup, bench.repeats, || {
            let mut tape = Tape::new();
            let xv = tape.variable(x.clone());
            let params: Vec<_> = act
                .params()
                .into_iter()
                .map(|(_, t)| tape.variable(t.clone()))
                .collect();
            let y = act.record(&mut tape, xv, &params)?;
            tape.backward_with(y, seed.clone())?;
            std::hint::black_box(tape.grad(xv));
            Ok(())
        })?)
    } else {
        None
    };
    Ok(ActivationTiming {
        label: bench.spec.to_string(),
        forward,
        backward,
    })
}

/// `activation,median_ms,iqr_ms,min_ms,samples[,backward_median_ms,backward_iqr_ms]`
pub fn csv_header(backward: bool) -> &'static str {
    if backward {
        "activation,median_ms,iqr_ms,min_ms,samples,backward_median_ms,backward_iqr_ms"
    } else {
        "activation,median_ms,iqr_ms,min_ms,samples"
    }
}

pub fn csv_row(t: &ActivationTiming) -> String {
    let f = &t.forward;
    let mut row = format!(
        "{},{:.4},{:.4},{:.4},{}",
        t.label, f.median_ms, f.iqr_ms, f.min_ms, f.samples
    );
    if let Some(b) = &t.backward {
        row.push_str(&format!(",{:.4},{:.4}", b.median_ms, b.iqr_ms));
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let s = TimingStats::from_samples(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(s.median_ms, 3.0);
        assert_eq!(s.iqr_ms, 2.0);
        assert_eq!(s.min_ms, 1.0);
        let one = TimingStats::from_samples(&[7.0]).unwrap();
        assert_eq!((one.median_ms, one.iqr_ms), (7.0, 0.0));
    }

    #[test]
    fn single_repeat_row_is_well_formed() {
        let t = bench_activation(&ActivationBench {
            spec: ActivationSpec::mtlu(40, 0.05),
            shape: Shape::new(1, 2, 8, 8),
            repeats: 1,
            warmup: 0,
            backward: true,
            seed: 1,
        })
        .unwrap();
        let row = csv_row(&t);
        assert_eq!(row.split(',').count(), csv_header(true).split(',').count());
        assert!(row.starts_with("mtlu40(w=0.05),"));
    }
}
