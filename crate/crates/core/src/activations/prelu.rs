use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_PRELU_SLOPE: f64 = 0.25;

/// Per-channel negative slope, stored as `(1, C, 1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreluParams<T> {
    pub alpha: Tensor<T>,
}

impl<T: Real> PreluParams<T> {
    pub fn new(channels: usize, alpha: f64) -> Result<Self> {
        Ok(PreluParams {
            alpha: Tensor::full([1, channels, 1, 1], T::from_f64(alpha))?,
        })
    }

    pub fn cast<U: Real>(&self) -> PreluParams<U> {
        PreluParams {
            alpha: self.alpha.cast(),
        }
    }
}

fn check<T: Real>(x: &Tensor<T>, alpha: &Tensor<T>) -> Result<()> {
    if alpha.len() != x.shape().c {
        return Err(Error::ChannelMismatch {
            expected: alpha.len(),
            got: x.shape().c,
        });
    }
    Ok(())
}

/// `x` for `x > 0`, `alpha[c] * x` otherwise.
pub fn prelu_forward<T: Real>(x: &Tensor<T>, alpha: &Tensor<T>) -> Result<Tensor<T>> {
    check(x, alpha)?;
    let s = x.shape();
    let plane = s.plane();
    let mut out = x.clone();
    if plane == 0 {
        return Ok(out);
    }
    for (i, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
        let a = alpha.data()[i % s.c];
        for v in chunk {
            *v = if *v > T::zero() { *v } else { a * *v };
        }
    }
    Ok(out)
}

/// Returns `(dx, dalpha)`.
pub fn prelu_backward<T: Real>(
    x: &Tensor<T>,
    dy: &[T],
    alpha: &Tensor<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    check(x, alpha)?;
    if dy.len() != x.len() {
        return Err(Error::shape("prelu_backward: gradient length"));
    }
    let s = x.shape();
    let plane = s.plane();
    let mut dx = vec![T::zero(); x.len()];
    let mut da = vec![T::zero(); s.c];
    if plane == 0 {
        return Ok((dx, da));
    }
    for (i, ((d, xs), gs)) in dx
        .chunks_mut(plane)
        .zip(x.data().chunks(plane))
        .zip(dy.chunks(plane))
        .enumerate()
    {
        let c = i % s.c;
        let a = alpha.data()[c];
        let mut acc = T::zero();
        for ((d, &v), &g) in d.iter_mut().zip(xs).zip(gs) {
            let pos = v > T::zero();
            *d = if pos { g } else { a * g };
            acc += if pos { T::zero() } else { v * g };
        }
        da[c] += acc;
    }
    Ok((dx, da))
}

impl<T: Real> Tape<T> {
    pub fn prelu(&mut self, x: Var, alpha: Var) -> Result<Var> {
        let y = prelu_forward(self.value(x), self.value(alpha))?;
        self.push_op(
            y,
            &[x, alpha],
            Box::new(|ctx| {
                let (dx, da) = prelu_backward(ctx.inputs[0], ctx.grad, ctx.inputs[1])?;
                Ok(vec![Some(dx), Some(da)])
            }),
        )
    }
}
