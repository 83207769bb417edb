//! Stride-1, zero-padded "same" 2-D convolution via im2col + GEMM.

use crate::error::{Error, Result};
use crate::par;
use crate::real::Real;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{Shape, Tensor};

/// Weights `(out, in, k, k)` and bias `(1, out, 1, 1)` of a convolution layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvParams<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Result<Self> {
        check_kernel(kernel, kernel)?;
        Ok(ConvParams {
            weight: Tensor::zeros([out_channels, in_channels, kernel, kernel])?,
            bias: Tensor::zeros([1, out_channels, 1, 1])?,
        })
    }

    /// Fan-in scaled Gaussian weights (`std = sqrt(2 / (in * k * k))`), zero bias.
    pub fn kaiming(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        check_kernel(kernel, kernel)?;
        let fan_in = (in_channels * kernel * kernel).max(1) as f64;
        Ok(ConvParams {
            weight: Tensor::randn(
                [out_channels, in_channels, kernel, kernel],
                rng,
                0.0,
                (2.0 / fan_in).sqrt(),
            )?,
            bias: Tensor::zeros([1, out_channels, 1, 1])?,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape().c
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape().n
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape().h
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn cast<U: Real>(&self) -> ConvParams<U> {
        ConvParams {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

fn check_kernel(kh: usize, kw: usize) -> Result<()> {
    if kh.is_multiple_of(2) || kw.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "kernel {kh}x{kw} must have odd sides for same padding"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    out_c: usize,
}

impl Geometry {
    fn new(x: Shape, weight: Shape, bias: Shape) -> Result<Self> {
        check_kernel(weight.h, weight.w)?;
        if x.c != weight.c {
            return Err(Error::ChannelMismatch {
                expected: weight.c,
                got: x.c,
            });
        }
        if bias.numel() != weight.n {
            return Err(Error::shape(format!(
                "conv bias {bias} does not match {} output channels",
                weight.n
            )));
        }
        Ok(Geometry {
            c: x.c,
            h: x.h,
            w: x.w,
            kh: weight.h,
            kw: weight.w,
            out_c: weight.n,
        })
    }

    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn plane(&self) -> usize {
        self.h * self.w
    }
}

/// Columns `[lo, hi)` of an output line whose source column is `x + shift`.
fn valid_span(w: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).clamp(0, w as isize) as usize;
    let hi = (w as isize - shift).clamp(0, w as isize) as usize;
    (lo, hi.max(lo))
}

/// Unfolds one `(C, H, W)` sample into a `(C*kh*kw, H*W)` column matrix.
fn im2col<T: Real>(x: &[T], g: Geometry, col: &mut [T]) {
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    let plane = g.plane();
    for c in 0..g.c {
        let src = &x[c * plane..(c + 1) * plane];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let dst = &mut col[row * plane..(row + 1) * plane];
                let shift = kx as isize - pw as isize;
                let (lo, hi) = valid_span(g.w, shift);
                for y in 0..g.h {
                    let sy = y as isize + ky as isize - ph as isize;
                    let line = &mut dst[y * g.w..(y + 1) * g.w];
                    if sy < 0 || sy >= g.h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let srow = &src[sy as usize * g.w..(sy as usize + 1) * g.w];
                    line[..lo].fill(T::zero());
                    line[hi..].fill(T::zero());
                    let (a, b) = (
                        (lo as isize + shift) as usize,
                        (hi as isize + shift) as usize,
                    );
                    line[lo..hi].copy_from_slice(&srow[a..b]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the sample.
fn col2im<T: Real>(col: &[T], g: Geometry, dx: &mut [T]) {
    let (ph, pw) = (g.kh / 2, g.kw / 2);
    let plane = g.plane();
    for c in 0..g.c {
        let dst = &mut dx[c * plane..(c + 1) * plane];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (c * g.kh + ky) * g.kw + kx;
                let src = &col[row * plane..(row + 1) * plane];
                let shift = kx as isize - pw as isize;
                let (lo, hi) = valid_span(g.w, shift);
                let (a, b) = (
                    (lo as isize + shift) as usize,
                    (hi as isize + shift) as usize,
                );
                for y in 0..g.h {
                    let sy = y as isize + ky as isize - ph as isize;
                    if sy < 0 || sy >= g.h as isize {
                        continue;
                    }
                    let drow = &mut dst[sy as usize * g.w..(sy as usize + 1) * g.w];
                    for (d, &v) in drow[a..b].iter_mut().zip(&src[y * g.w + lo..y * g.w + hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
}

/// Forward pass; with `keep_cols` also returns every sample's column matrix
/// for reuse by the backward pass.
fn forward_impl<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    keep_cols: bool,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    let g = Geometry::new(x.shape(), weight.shape(), bias.shape())?;
    let s = x.shape();
    let mut out = Tensor::zeros([s.n, g.out_c, s.h, s.w])?;
    let (plane, rows) = (g.plane(), g.rows());
    if plane == 0 {
        return Ok((out, keep_cols.then(Vec::new)));
    }
    let in_stride = g.c * plane;
    let col_stride = rows * plane;
    let wdata = weight.data();
    let bdata = bias.data();
    let run = |n: usize, o: &mut [T], col: &mut [T]| {
        for (oc, chunk) in o.chunks_mut(plane).enumerate() {
            chunk.fill(bdata[oc]);
        }
        im2col(&x.data()[n * in_stride..(n + 1) * in_stride], g, col);
        T::gemm(
            g.out_c,
            rows,
            plane,
            T::one(),
            wdata,
            (rows, 1),
            col,
            (plane, 1),
            T::one(),
            o,
            (plane, 1),
        );
    };
    if keep_cols {
        let mut cols = vec![T::zero(); s.n * col_stride];
        par::for_each_chunk_pair(out.data_mut(), g.out_c * plane, &mut cols, col_stride, run);
        Ok((out, Some(cols)))
    } else {
        par::for_each_chunk(out.data_mut(), g.out_c * plane, |n, o| {
            run(n, o, &mut vec![T::zero(); col_stride])
        });
        Ok((out, None))
    }
}

/// Same-size convolution of `x` with `weight` plus per-channel `bias`.
pub fn conv2d<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(forward_impl(x, weight, bias, false)?.0)
}

/// Gradients of [`conv2d`] given the output gradient `dy`.
///
/// Returns `(dx, dweight, dbias)`; entries are `None` when not requested.
#[allow(clippy::type_complexity)]
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    dy: &[T],
    need_x: bool,
    need_params: bool,
) -> Result<(Option<Vec<T>>, Option<Vec<T>>, Option<Vec<T>>)> {
    backward_impl(x, None, weight, dy, need_x, need_params)
}

#[allow(clippy::type_complexity)]
fn backward_impl<T: Real>(
    x: &Tensor<T>,
    cols: Option<&[T]>,
    weight: &Tensor<T>,
    dy: &[T],
    need_x: bool,
    need_params: bool,
) -> Result<(Option<Vec<T>>, Option<Vec<T>>, Option<Vec<T>>)> {
    let ws = weight.shape();
    let g = Geometry::new(x.shape(), ws, Shape::new(1, ws.n, 1, 1))?;
    let n = x.shape().n;
    let (plane, rows) = (g.plane(), g.rows());
    if dy.len() != n * g.out_c * plane {
        return Err(Error::shape("conv2d_backward: gradient length"));
    }
    let in_stride = g.c * plane;
    let out_stride = g.out_c * plane;
    let col_stride = rows * plane;
    if cols.is_some_and(|c| c.len() != n * col_stride) {
        return Err(Error::Internal(
            "cached conv columns have the wrong size".into(),
        ));
    }
    let wdata = weight.data();

    // Per-sample partials, reduced below in sample order for reproducibility.
    let partials: Vec<(Option<Vec<T>>, Option<Vec<T>>)> = par::map(n, |i| {
        let dy_n = &dy[i * out_stride..(i + 1) * out_stride];
        let dw = need_params.then(|| {
            let mut scratch = Vec::new();
            let col = match cols {
                Some(c) => &c[i * col_stride..(i + 1) * col_stride],
                None => {
                    scratch.resize(col_stride, T::zero());
                    im2col(
                        &x.data()[i * in_stride..(i + 1) * in_stride],
                        g,
                        &mut scratch,
                    );
                    &scratch[..]
                }
            };
            let mut dw = vec![T::zero(); g.out_c * rows];
            // dW = dY (out, HW) * col^T (HW, rows)
            T::gemm(
                g.out_c,
                plane,
                rows,
                T::one(),
                dy_n,
                (plane, 1),
                col,
                (1, plane),
                T::zero(),
                &mut dw,
                (rows, 1),
            );
            dw
        });
        let dx = need_x.then(|| {
            let mut dcol = vec![T::zero(); col_stride];
            // dcol = W^T (rows, out) * dY (out, HW)
            T::gemm(
                rows,
                g.out_c,
                plane,
                T::one(),
                wdata,
                (1, rows),
                dy_n,
                (plane, 1),
                T::zero(),
                &mut dcol,
                (plane, 1),
            );
            let mut dx = vec![T::zero(); in_stride];
            col2im(&dcol, g, &mut dx);
            dx
        });
        (dx, dw)
    });

    let mut dx_all = need_x.then(|| Vec::with_capacity(n * in_stride));
    let mut dw_all = need_params.then(|| vec![T::zero(); g.out_c * rows]);
    for (dx, dw) in partials {
        if let (Some(acc), Some(dx)) = (dx_all.as_mut(), dx) {
            acc.extend_from_slice(&dx);
        }
        if let (Some(acc), Some(dw)) = (dw_all.as_mut(), dw) {
            acc.iter_mut().zip(&dw).for_each(|(a, b)| *a += *b);
        }
    }
    let db = need_params.then(|| {
        let mut db = vec![T::zero(); g.out_c];
        for i in 0..n {
            for (oc, acc) in db.iter_mut().enumerate() {
                let start = i * out_stride + oc * plane;
                *acc += dy[start..start + plane].iter().copied().sum::<T>();
            }
        }
        db
    });
    Ok((dx_all, dw_all, db))
}

impl<T: Real> Tape<T> {
    pub fn conv2d(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let need_params = self.requires_grad(weight) || self.requires_grad(bias);
        let (out, cols) = forward_impl(
            self.value(x),
            self.value(weight),
            self.value(bias),
            need_params,
        )?;
        self.push_op(
            out,
            &[x, weight, bias],
            Box::new(move |ctx| {
                let need_params = ctx.needs[1] || ctx.needs[2];
                let (dx, dw, db) = backward_impl(
                    ctx.inputs[0],
                    cols.as_deref(),
                    ctx.inputs[1],
                    ctx.grad,
                    ctx.needs[0],
                    need_params,
                )?;
                Ok(vec![dx, dw, db])
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Six nested loops straight from the definition.
    fn naive_conv(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        let s = x.shape();
        let ws = w.shape();
        let (ph, pw) = (ws.h as isize / 2, ws.w as isize / 2);
        let mut out = Tensor::zeros([s.n, ws.n, s.h, s.w]).unwrap();
        for n in 0..s.n {
            for o in 0..ws.n {
                for y in 0..s.h {
                    for xx in 0..s.w {
                        let mut acc = b.data()[o];
                        for c in 0..s.c {
                            for ky in 0..ws.h {
                                for kx in 0..ws.w {
                                    let sy = y as isize + ky as isize - ph;
                                    let sx = xx as isize + kx as isize - pw;
                                    if sy >= 0 && sy < s.h as isize && sx >= 0 && sx < s.w as isize
                                    {
                                        acc += w.get(o, c, ky, kx)
                                            * x.get(n, c, sy as usize, sx as usize);
                                    }
                                }
                            }
                        }
                        out.set(n, o, y, xx, acc);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel() {
        let mut rng = Rng::new(1);
        let x = Tensor::<f32>::randn([2, 1, 5, 4], &mut rng, 0.0, 1.0).unwrap();
        let w = Tensor::full([1, 1, 1, 1], 1.0).unwrap();
        let b = Tensor::zeros([1, 1, 1, 1]).unwrap();
        assert_eq!(conv2d(&x, &w, &b).unwrap().data(), x.data());
    }

    #[test]
    fn zero_weight_constant_bias() {
        let mut rng = Rng::new(2);
        let x = Tensor::<f32>::randn([1, 3, 6, 6], &mut rng, 0.0, 1.0).unwrap();
        let p = ConvParams::<f32> {
            weight: Tensor::zeros([2, 3, 3, 3]).unwrap(),
            bias: Tensor::full([1, 2, 1, 1], 0.75).unwrap(),
        };
        let y = conv2d(&x, &p.weight, &p.bias).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 2, 6, 6));
        assert!(y.data().iter().all(|&v| v == 0.75));
    }

    #[test]
    fn matches_naive_reference() {
        let mut rng = Rng::new(3);
        let x = Tensor::<f64>::randn([1, 2, 5, 5], &mut rng, 0.0, 1.0).unwrap();
        let w = Tensor::<f64>::randn([4, 2, 3, 3], &mut rng, 0.0, 1.0).unwrap();
        let b = Tensor::<f64>::randn([1, 4, 1, 1], &mut rng, 0.0, 1.0).unwrap();
        let fast = conv2d(&x, &w, &b).unwrap();
        let slow = naive_conv(&x, &w, &b);
        for (a, e) in fast.data().iter().zip(slow.data()) {
            assert!((a - e).abs() < 1e-6, "{a} vs {e}");
        }
    }

    #[test]
    fn matches_naive_reference_5x5_batch() {
        let mut rng = Rng::new(4);
        let x = Tensor::<f64>::randn([3, 3, 7, 6], &mut rng, 0.0, 1.0).unwrap();
        let w = Tensor::<f64>::randn([2, 3, 5, 5], &mut rng, 0.0, 1.0).unwrap();
        let b = Tensor::<f64>::randn([1, 2, 1, 1], &mut rng, 0.0, 1.0).unwrap();
        let fast = conv2d(&x, &w, &b).unwrap();
        let slow = naive_conv(&x, &w, &b);
        for (a, e) in fast.data().iter().zip(slow.data()) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_in_input() {
        let mut rng = Rng::new(5);
        let x1 = Tensor::<f32>::randn([2, 3, 6, 6], &mut rng, 0.0, 1.0).unwrap();
        let x2 = Tensor::<f32>::randn([2, 3, 6, 6], &mut rng, 0.0, 1.0).unwrap();
        let w = Tensor::<f32>::randn([4, 3, 3, 3], &mut rng, 0.0, 0.3).unwrap();
        let b = Tensor::zeros([1, 4, 1, 1]).unwrap();
        let (alpha, beta) = (0.7f32, -1.3f32);
        let mix = Tensor::from_vec(
            x1.shape(),
            x1.data()
                .iter()
                .zip(x2.data())
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        )
        .unwrap();
        let lhs = conv2d(&mix, &w, &b).unwrap();
        let y1 = conv2d(&x1, &w, &b).unwrap();
        let y2 = conv2d(&x2, &w, &b).unwrap();
        for i in 0..lhs.len() {
            let rhs = alpha * y1.data()[i] + beta * y2.data()[i];
            assert!((lhs.data()[i] - rhs).abs() < 1e-5);
        }
    }

    #[test]
    fn channel_mismatch() {
        let x = Tensor::<f32>::zeros([1, 2, 4, 4]).unwrap();
        let p = ConvParams::<f32>::zeros(3, 1, 3).unwrap();
        assert!(matches!(
            conv2d(&x, &p.weight, &p.bias),
            Err(Error::ChannelMismatch {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(ConvParams::<f32>::zeros(1, 1, 2).is_err());
    }
}
