//! Separable bicubic resampling (cubic convolution, `a = -0.5`) with
//! clamped edges. Downscaling widens the kernel by the inverse scale so it
//! also acts as the anti-aliasing prefilter.

use super::image::Plane;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

pub const CUBIC_A: f64 = -0.5;

/// Cubic convolution kernel.
pub fn cubic(x: f64) -> f64 {
    let a = CUBIC_A;
    let t = x.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Taps contributing to one output sample along an axis.
struct Taps {
    first: isize,
    weights: Vec<f64>,
    /// Offset of the heaviest tap, used as the reference value.
    anchor: usize,
}

fn taps(n_in: usize, n_out: usize) -> Vec<Taps> {
    let scale = n_out as f64 / n_in as f64;
    let stretch = if scale < 1.0 { scale } else { 1.0 };
    let support = 2.0 / stretch;
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) / scale - 0.5;
            let first = (center - support).floor() as isize;
            let last = (center + support).ceil() as isize;
            let mut weights: Vec<f64> = (first..=last)
                .map(|j| stretch * cubic(stretch * (center - j as f64)))
                .collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let anchor = weights
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map_or(0, |(k, _)| k);
            Taps {
                first,
                weights,
                anchor,
            }
        })
        .collect()
}

fn clamp_index(j: isize, n: usize) -> usize {
    j.clamp(0, n as isize - 1) as usize
}

/// Resamples one axis of `src` (`lines` lines of `n_in` samples, `stride`
/// apart, `step` between samples). Each output is written as
/// `ref + sum w (x - ref)` so constant input stays exactly constant.
fn resample_axis(
    src: &[f64],
    n_in: usize,
    n_out: usize,
    lines: usize,
    along_rows: bool,
) -> Vec<f64> {
    let table = taps(n_in, n_out);
    let mut out = vec![0.0; n_out * lines];
    for line in 0..lines {
        let at = |j: usize| {
            if along_rows {
                src[line * n_in + j]
            } else {
                src[j * lines + line]
            }
        };
        for (i, t) in table.iter().enumerate() {
            let reference = at(clamp_index(t.first + t.anchor as isize, n_in));
            let mut acc = 0.0;
            for (k, w) in t.weights.iter().enumerate() {
                acc += w * (at(clamp_index(t.first + k as isize, n_in)) - reference);
            }
            let v = reference + acc;
            if along_rows {
                out[line * n_out + i] = v;
            } else {
                out[i * lines + line] = v;
            }
        }
    }
    out
}

/// Resizes `p` to `width x height`.
pub fn bicubic_resize(p: &Plane, width: usize, height: usize) -> Result<Plane> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!(
            "output size {width}x{height} is empty"
        )));
    }
    if p.width == 0 || p.height == 0 {
        return Err(Error::invalid("input plane is empty"));
    }
    let rows = resample_axis(&p.data, p.width, width, p.height, true);
    let out = resample_axis(&rows, p.height, height, width, false);
    Plane::new(width, height, out)
}

/// Resizes by `scale`; output sides are rounded to the nearest integer.
pub fn bicubic_scale(p: &Plane, scale: f64) -> Result<Plane> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let w = (p.width as f64 * scale).round() as usize;
    let h = (p.height as f64 * scale).round() as usize;
    if w < 1 || h < 1 {
        return Err(Error::invalid(format!(
            "scaling {}x{} by {scale} leaves no pixels",
            p.width, p.height
        )));
    }
    bicubic_resize(p, w, h)
}

/// Bicubic upscaling of every plane of a tensor by an integer factor.
pub fn upscale_tensor<T: Real>(x: &Tensor<T>, factor: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    let (h, w) = (s.h * factor, s.w * factor);
    let mut out = Vec::with_capacity(s.n * s.c * h * w);
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = Plane::new(s.w, s.h, x.plane(n, c).iter().map(|v| v.as_f64()).collect())?;
            let up = bicubic_resize(&plane, w, h)?;
            out.extend(up.data.iter().map(|&v| T::from_f64(v)));
        }
    }
    Tensor::from_vec([s.n, s.c, h, w], out)
}
