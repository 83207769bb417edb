//! Reference implementations written independently of the library, used as
//! oracles by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::path::PathBuf;

use mtlu_core::networks::{Layer, Network};
use mtlu_core::{Real, Rng, Tensor};

/// Piecewise-affine map evaluated by walking the anchors one by one.
/// Anchor `k` is `left + k * w`; bin `k` is `[c_k, c_{k+1})` and the two
/// outermost bins extend to infinity.
pub fn mtlu_if_chain(x: f64, left: f64, w: f64, a: &[f64], b: &[f64]) -> f64 {
    let k = a.len();
    let mut bin = 0;
    for j in 1..k {
        if x >= left + j as f64 * w {
            bin = j;
        } else {
            break;
        }
    }
    a[bin] * x + b[bin]
}

/// Keys cubic convolution kernel with `a = -0.5`.
fn keys(t: f64) -> f64 {
    let t = t.abs();
    if t < 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Weights of every source index (before clamping) for one output
/// coordinate, normalized to sum to one.
fn axis_weights(i: usize, n_in: usize, n_out: usize) -> Vec<(isize, f64)> {
    let s = n_out as f64 / n_in as f64;
    let k = s.min(1.0);
    let u = (i as f64 + 0.5) / s - 0.5;
    let reach = (2.0 / k).ceil() as isize + 1;
    let c = u.floor() as isize;
    let mut w: Vec<(isize, f64)> = (c - reach..=c + reach)
        .map(|j| (j, k * keys(k * (u - j as f64))))
        .filter(|&(_, v)| v != 0.0)
        .collect();
    let total: f64 = w.iter().map(|p| p.1).sum();
    w.iter_mut().for_each(|p| p.1 /= total);
    w
}

/// Bicubic resize by direct 2D summation over clamped source pixels.
pub fn naive_resize(src: &[f64], w: usize, h: usize, ow: usize, oh: usize) -> Vec<f64> {
    let clamp = |j: isize, n: usize| j.clamp(0, n as isize - 1) as usize;
    let mut out = vec![0.0; ow * oh];
    for oy in 0..oh {
        let wy = axis_weights(oy, h, oh);
        for ox in 0..ow {
            let wx = axis_weights(ox, w, ow);
            let mut acc = 0.0;
            for &(jy, vy) in &wy {
                for &(jx, vx) in &wx {
                    acc += vy * vx * src[clamp(jy, h) * w + clamp(jx, w)];
                }
            }
            out[oy * ow + ox] = acc;
        }
    }
    out
}

/// PSNR with peak 1: squared errors in one pass, compensated sum in a second.
pub fn psnr_two_pass(a: &[f64], b: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).collect();
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in sq {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    let mse = sum / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Pixel shuffle from its index definition:
/// `out[n][c][h*r+i][w*r+j] = in[n][c*r*r + i*r + j][h][w]`.
pub fn shuffle_by_index<T: Copy + Default>(x: &[T], dims: [usize; 4], r: usize) -> Vec<T> {
    let [n, c, h, w] = dims;
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let mut out = vec![T::default(); x.len()];
    for b in 0..n {
        for ch in 0..oc {
            for y in 0..oh {
                for xx in 0..ow {
                    let src_c = ch * r * r + (y % r) * r + xx % r;
                    let src = ((b * c + src_c) * h + y / r) * w + xx / r;
                    out[((b * oc + ch) * oh + y) * ow + xx] = x[src];
                }
            }
        }
    }
    out
}

pub fn bits<T: Real>(t: &[T]) -> Vec<u64> {
    t.iter().map(|v| v.as_f64().to_bits()).collect()
}

/// Adds small Gaussian noise to every learnable tensor and batch-norm
/// buffer, so nothing sits at its initial value.
pub fn perturb<T: Real>(net: &mut Network<T>, rng: &mut Rng, scale: f64) {
    for t in net.params_mut() {
        for v in t.data_mut() {
            *v += T::from_f64(scale * rng.normal());
        }
    }
    for layer in net.layers_mut() {
        if let Layer::BatchNorm(p) = layer {
            for v in p.running_mean.iter_mut() {
                *v = T::from_f64(0.1 * rng.normal());
            }
            for v in p.running_var.iter_mut() {
                *v = T::from_f64(0.5 + rng.uniform(0.0, 1.0));
            }
        }
    }
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// Dims followed by values, all little-endian (`u32` x4, then `f32`).
pub fn write_tensor(t: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    for d in t.shape().dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_tensor(bytes: &[u8]) -> Tensor<f32> {
    let dim = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let dims = [dim(0), dim(1), dim(2), dim(3)];
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::from_vec(dims, data).unwrap()
}
