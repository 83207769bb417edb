//! Spatially invariant adaptive piecewise linear unit:
//! `h(x) = max(0, x) + sum_s a[s] * max(0, b[s] - x)`, one parameter set per
//! channel. Every hinge is evaluated for every element, so cost grows linearly
//! with the number of hinges.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct AplParams<T> {
    /// Hinge weights, `(1, C, 1, S)`.
    pub a: Tensor<T>,
    /// Hinge positions, `(1, C, 1, S)`.
    pub b: Tensor<T>,
}

impl<T: Real> AplParams<T> {
    /// Zero-weight hinges (the function starts as ReLU) with positions spread
    /// evenly over `[-1, 1]`.
    pub fn new(channels: usize, kernels: usize) -> Result<Self> {
        let a = Tensor::zeros([1, channels, 1, kernels])?;
        let positions: Vec<T> = (0..channels)
            .flat_map(|_| {
                (0..kernels)
                    .map(move |s| T::from_f64(-1.0 + 2.0 * (s as f64 + 0.5) / kernels as f64))
            })
            .collect();
        let b = Tensor::from_vec([1, channels, 1, kernels], positions)?;
        Ok(AplParams { a, b })
    }

    pub fn kernels(&self) -> usize {
        self.a.shape().w
    }

    pub fn cast<U: Real>(&self) -> AplParams<U> {
        AplParams {
            a: self.a.cast(),
            b: self.b.cast(),
        }
    }
}

fn check<T: Real>(x: &Tensor<T>, a: &Tensor<T>, b: &Tensor<T>) -> Result<usize> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "APL tables {} vs {}",
            a.shape(),
            b.shape()
        )));
    }
    if a.shape().c != x.shape().c {
        return Err(Error::ChannelMismatch {
            expected: a.shape().c,
            got: x.shape().c,
        });
    }
    Ok(a.shape().w)
}

pub fn apl_forward<T: Real>(x: &Tensor<T>, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let kernels = check(x, a, b)?;
    let s = x.shape();
    let plane = s.plane();
    let mut out = Tensor::zeros(s)?;
    if plane == 0 {
        return Ok(out);
    }
    for (i, (o, xs)) in out
        .data_mut()
        .chunks_mut(plane)
        .zip(x.data().chunks(plane))
        .enumerate()
    {
        let c = i % s.c;
        let aw = &a.data()[c * kernels..(c + 1) * kernels];
        let bw = &b.data()[c * kernels..(c + 1) * kernels];
        for (o, &v) in o.iter_mut().zip(xs) {
            let mut acc = v.max(T::zero());
            for (&as_, &bs) in aw.iter().zip(bw) {
                acc += as_ * (bs - v).max(T::zero());
            }
            *o = acc;
        }
    }
    Ok(out)
}

/// Returns `(dx, da, db)`.
pub fn apl_backward<T: Real>(
    x: &Tensor<T>,
    dy: &[T],
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let kernels = check(x, a, b)?;
    if dy.len() != x.len() {
        return Err(Error::shape("apl_backward: gradient length"));
    }
    let s = x.shape();
    let plane = s.plane();
    let mut dx = vec![T::zero(); x.len()];
    let mut da = vec![T::zero(); a.len()];
    let mut db = vec![T::zero(); b.len()];
    if plane == 0 {
        return Ok((dx, da, db));
    }
    for (i, ((d, xs), gs)) in dx
        .chunks_mut(plane)
        .zip(x.data().chunks(plane))
        .zip(dy.chunks(plane))
        .enumerate()
    {
        let c = i % s.c;
        let range = c * kernels..(c + 1) * kernels;
        let aw = &a.data()[range.clone()];
        let bw = &b.data()[range.clone()];
        let (da, db) = (&mut da[range.clone()], &mut db[range]);
        for ((d, &v), &g) in d.iter_mut().zip(xs).zip(gs) {
            let mut slope = if v > T::zero() { T::one() } else { T::zero() };
            for k in 0..kernels {
                let hinge = bw[k] - v;
                if hinge > T::zero() {
                    slope -= aw[k];
                    da[k] += g * hinge;
                    db[k] += g * aw[k];
                }
            }
            *d = g * slope;
        }
    }
    Ok((dx, da, db))
}

impl<T: Real> Tape<T> {
    pub fn apl(&mut self, x: Var, a: Var, b: Var) -> Result<Var> {
        let y = apl_forward(self.value(x), self.value(a), self.value(b))?;
        self.push_op(
            y,
            &[x, a, b],
            Box::new(|ctx| {
                let (dx, da, db) =
                    apl_backward(ctx.inputs[0], ctx.grad, ctx.inputs[1], ctx.inputs[2])?;
                Ok(vec![Some(dx), Some(da), Some(db)])
            }),
        )
    }
}
