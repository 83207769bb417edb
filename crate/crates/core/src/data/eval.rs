//! Benchmark evaluation: per-image PSNR against a degradation baseline.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::color::luminance;
use super::dataset::{downscale, Degradation};
use super::image::{NamedImage, Plane};
use super::metrics::{mean_psnr, psnr_shaved};
use super::noise::{add_awgn, image_seed};
use super::resize::bicubic_resize;
use crate::error::{Error, Result};
use crate::networks::{Network, Task};
use crate::real::Real;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub psnr_db: f64,
    /// Bicubic upscaling for SR, the noisy input for denoising.
    pub baseline_db: f64,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_psnr: f64,
    pub mean_baseline: f64,
}

impl EvalReport {
    fn from_rows(rows: Vec<EvalRow>) -> Self {
        let ours: Vec<f64> = rows.iter().map(|r| r.psnr_db).collect();
        let base: Vec<f64> = rows.iter().map(|r| r.baseline_db).collect();
        EvalReport {
            mean_psnr: mean_psnr(&ours),
            mean_baseline: mean_psnr(&base),
            rows,
        }
    }

    /// `image_name,psnr_db,runtime_ms`, one row per image.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "image_name,psnr_db,runtime_ms")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.3}",
                r.name,
                format_db(r.psnr_db),
                r.runtime_ms
            )?;
        }
        Ok(())
    }
}

/// Four decimals, or `inf` for identical images.
pub fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

/// One evaluation image after degradation.
#[derive(Clone, Debug)]
pub struct EvalPair {
    pub name: String,
    pub input: Plane,
    pub target: Plane,
    pub baseline: Plane,
}

/// Degraded inputs, clean targets and baselines for every image. Noise is
/// seeded per image name.
pub fn prepare(
    images: &[NamedImage],
    degradation: Degradation,
    seed: u64,
) -> Result<Vec<EvalPair>> {
    images
        .iter()
        .map(|img| {
            let target = luminance(&img.image)?.crop_to_multiple(degradation.multiple())?;
            let (input, baseline) = match degradation {
                Degradation::Bicubic { factor } => {
                    let lr = downscale(&target, factor)?;
                    let up = bicubic_resize(&lr, target.width, target.height)?;
                    (lr, up)
                }
                Degradation::Awgn { sigma } => {
                    let noisy =
                        add_awgn(&target, sigma, &mut Rng::new(image_seed(seed, &img.name)))?;
                    (noisy.clone(), noisy)
                }
            };
            Ok(EvalPair {
                name: img.name.clone(),
                input,
                target,
                baseline,
            })
        })
        .collect()
}

/// Evaluates an arbitrary restoration function. SR PSNR discards a
/// `factor`-pixel border; denoising uses the whole image.
pub fn eval_with<T, F>(
    predict: F,
    pairs: &[EvalPair],
    degradation: Degradation,
) -> Result<EvalReport>
where
    T: Real,
    F: Fn(&Tensor<T>) -> Result<Tensor<T>> + Sync,
{
    let shave = match degradation {
        Degradation::Bicubic { factor } => factor,
        Degradation::Awgn { .. } => 0,
    };
    let rows = pairs
        .par_iter()
        .map(|p| {
            let x = p.input.to_tensor::<T>();
            let start = Instant::now();
            let y = predict(&x)?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let out = Plane::from_tensor(&y)?;
            // Targets at model precision, so an exact identity scores inf.
            let target = Plane::from_tensor(&p.target.to_tensor::<T>())?;
            Ok(EvalRow {
                name: p.name.clone(),
                psnr_db: psnr_shaved(&out, &target, shave)?,
                baseline_db: psnr_shaved(&p.baseline, &p.target, shave)?,
                runtime_ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows))
}

/// Checks that `net` was built for `degradation`.
pub fn check_compatible<T: Real>(net: &Network<T>, degradation: Degradation) -> Result<()> {
    match (net.spec().task, degradation) {
        (Task::SuperResolution { factor }, Degradation::Bicubic { factor: f }) if factor == f => {
            Ok(())
        }
        (Task::Denoise, Degradation::Awgn { .. }) => Ok(()),
        (task, d) => Err(Error::invalid(format!(
            "network task {} (x{}) does not match degradation {d:?}",
            task.name(),
            net.spec().scale()
        ))),
    }
}

/// Runs `net` over `images` and reports per-image and mean PSNR.
pub fn eval_benchmark<T: Real>(
    net: &Network<T>,
    images: &[NamedImage],
    degradation: Degradation,
    seed: u64,
) -> Result<EvalReport> {
    check_compatible(net, degradation)?;
    let pairs = prepare(images, degradation, seed)?;
    eval_with(|x| net.forward(x), &pairs, degradation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{synthetic_corpus, SyntheticSpec};

    #[test]
    fn identity_denoiser_scores_noisy_psnr() {
        let images = synthetic_corpus(&SyntheticSpec::new(6, 128, 3)).unwrap();
        let d = Degradation::Awgn { sigma: 25.0 };
        let pairs = prepare(&images, d, 1).unwrap();
        let report = eval_with(|x: &Tensor<f64>| Ok(x.clone()), &pairs, d).unwrap();
        let expected = 20.0 * (255.0f64 / 25.0).log10();
        assert!(
            (report.mean_psnr - expected).abs() < 0.2,
            "{}",
            report.mean_psnr
        );
        assert_eq!(report.mean_psnr, report.mean_baseline);
    }

    #[test]
    fn bicubic_baseline_finite_and_order_independent() {
        let images = synthetic_corpus(&SyntheticSpec::new(5, 48, 4)).unwrap();
        let d = Degradation::Bicubic { factor: 2 };
        let up = |x: &Tensor<f64>| crate::data::resize::upscale_tensor(x, 2);
        let a = eval_with(up, &prepare(&images, d, 0).unwrap(), d).unwrap();
        let mut rev = images.clone();
        rev.reverse();
        let b = eval_with(up, &prepare(&rev, d, 0).unwrap(), d).unwrap();
        assert!(a.mean_baseline.is_finite() && a.mean_baseline > 0.0);
        assert_eq!(a.mean_psnr.to_bits(), b.mean_psnr.to_bits());
        assert_eq!(a.rows.len(), 5);
    }

    #[test]
    fn csv_layout() {
        let report = EvalReport::from_rows(vec![
            EvalRow {
                name: "a".into(),
                psnr_db: f64::INFINITY,
                baseline_db: 1.0,
                runtime_ms: 0.5,
            },
            EvalRow {
                name: "b".into(),
                psnr_db: 30.25,
                baseline_db: 1.0,
                runtime_ms: 2.0,
            },
        ]);
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "image_name,psnr_db,runtime_ms\na,inf,0.500\nb,30.2500,2.000\n"
        );
    }
}
