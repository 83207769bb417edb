//! Per-channel batch normalization over `(N, H, W)`.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnParams<T> {
    /// `(1, C, 1, 1)`
    pub gamma: Tensor<T>,
    /// `(1, C, 1, 1)`
    pub beta: Tensor<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    /// Weight kept by the running statistics on each update.
    pub momentum: f64,
    pub eps: f64,
}

impl<T: Real> BnParams<T> {
    pub fn new(channels: usize) -> Result<Self> {
        Ok(BnParams {
            gamma: Tensor::full([1, channels, 1, 1], T::one())?,
            beta: Tensor::zeros([1, channels, 1, 1])?,
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: DEFAULT_MOMENTUM,
            eps: DEFAULT_EPS,
        })
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    /// Folds one batch's statistics into the running estimates. `var` is the
    /// biased batch variance over `count` samples per channel.
    pub fn update_running(&mut self, stats: &BatchStats<T>) {
        let m = T::from_f64(self.momentum);
        let one_m = T::one() - m;
        let count = stats.count as f64;
        let unbias = T::from_f64(count / (count - 1.0));
        for c in 0..self.channels() {
            self.running_mean[c] = m * self.running_mean[c] + one_m * stats.mean[c];
            self.running_var[c] = m * self.running_var[c] + one_m * stats.var[c] * unbias;
        }
    }

    pub fn cast<U: Real>(&self) -> BnParams<U> {
        BnParams {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self
                .running_mean
                .iter()
                .map(|v| U::from_f64(v.as_f64()))
                .collect(),
            running_var: self
                .running_var
                .iter()
                .map(|v| U::from_f64(v.as_f64()))
                .collect(),
            momentum: self.momentum,
            eps: self.eps,
        }
    }
}

/// Batch mean and biased variance per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub count: usize,
}

fn check_affine<T: Real>(x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<usize> {
    let c = x.shape().c;
    if gamma.len() != c || beta.len() != c {
        return Err(Error::ChannelMismatch {
            expected: gamma.len(),
            got: c,
        });
    }
    Ok(c)
}

/// Statistics accumulated in `f64` with a fixed summation order.
pub fn batch_stats<T: Real>(x: &Tensor<T>) -> Result<BatchStats<T>> {
    let s = x.shape();
    let count = s.per_channel();
    if count < 2 {
        return Err(Error::invalid(format!(
            "batch norm needs more than one value per channel in train mode, got {count} for {s}"
        )));
    }
    let mut mean = vec![T::zero(); s.c];
    let mut var = vec![T::zero(); s.c];
    for c in 0..s.c {
        let mut sum = 0.0;
        for n in 0..s.n {
            sum += x.plane(n, c).iter().map(|v| v.as_f64()).sum::<f64>();
        }
        let mu = sum / count as f64;
        let mut sq = 0.0;
        for n in 0..s.n {
            sq += x
                .plane(n, c)
                .iter()
                .map(|v| (v.as_f64() - mu).powi(2))
                .sum::<f64>();
        }
        mean[c] = T::from_f64(mu);
        var[c] = T::from_f64(sq / count as f64);
    }
    Ok(BatchStats { mean, var, count })
}

fn normalize<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mean: &[T],
    var: &[T],
    eps: f64,
) -> Result<Tensor<T>> {
    let s = x.shape();
    let plane = s.plane();
    let eps = T::from_f64(eps);
    let mut out = x.clone();
    for n in 0..s.n {
        for c in 0..s.c {
            let inv_std = T::one() / (var[c] + eps).sqrt();
            let scale = gamma.data()[c] * inv_std;
            let shift = beta.data()[c] - mean[c] * scale;
            let start = (n * s.c + c) * plane;
            for v in &mut out.data_mut()[start..start + plane] {
                *v = *v * scale + shift;
            }
        }
    }
    Ok(out)
}

/// Train-mode forward: normalizes with the batch's own statistics.
pub fn batchnorm_train<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<(Tensor<T>, BatchStats<T>)> {
    check_affine(x, gamma, beta)?;
    let stats = batch_stats(x)?;
    let y = normalize(x, gamma, beta, &stats.mean, &stats.var, eps)?;
    Ok((y, stats))
}

/// Eval-mode forward: a fixed per-channel affine map from running statistics.
pub fn batchnorm_eval<T: Real>(x: &Tensor<T>, p: &BnParams<T>) -> Result<Tensor<T>> {
    check_affine(x, &p.gamma, &p.beta)?;
    normalize(x, &p.gamma, &p.beta, &p.running_mean, &p.running_var, p.eps)
}

/// Runs `x` through batch norm in the given mode, updating the running
/// statistics of `p` in train mode.
pub fn batchnorm<T: Real>(x: &Tensor<T>, p: &mut BnParams<T>, mode: Mode) -> Result<Tensor<T>> {
    match mode {
        Mode::Train => {
            let (y, stats) = batchnorm_train(x, &p.gamma, &p.beta, p.eps)?;
            p.update_running(&stats);
            Ok(y)
        }
        Mode::Eval => batchnorm_eval(x, p),
    }
}

#[allow(clippy::type_complexity)]
fn batchnorm_train_backward<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    stats: &BatchStats<T>,
    eps: f64,
    dy: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let s = x.shape();
    let plane = s.plane();
    let m = T::from_usize(stats.count);
    let eps = T::from_f64(eps);
    let mut dx = vec![T::zero(); x.len()];
    let mut dgamma = vec![T::zero(); s.c];
    let mut dbeta = vec![T::zero(); s.c];
    for c in 0..s.c {
        let inv_std = T::one() / (stats.var[c] + eps).sqrt();
        let mu = stats.mean[c];
        let mut sum_dy = T::zero();
        let mut sum_dy_xhat = T::zero();
        for n in 0..s.n {
            let start = (n * s.c + c) * plane;
            for i in start..start + plane {
                let xhat = (x.data()[i] - mu) * inv_std;
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xhat;
            }
        }
        dgamma[c] = sum_dy_xhat;
        dbeta[c] = sum_dy;
        let k = gamma.data()[c] * inv_std / m;
        for n in 0..s.n {
            let start = (n * s.c + c) * plane;
            for i in start..start + plane {
                let xhat = (x.data()[i] - mu) * inv_std;
                dx[i] = k * (m * dy[i] - sum_dy - xhat * sum_dy_xhat);
            }
        }
    }
    (dx, dgamma, dbeta)
}

impl<T: Real> Tape<T> {
    /// Train-mode batch norm. The returned statistics are for the caller to
    /// fold into running estimates.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats<T>)> {
        let (y, stats) = batchnorm_train(self.value(x), self.value(gamma), self.value(beta), eps)?;
        let saved = stats.clone();
        let var = self.push_op(
            y,
            &[x, gamma, beta],
            Box::new(move |ctx| {
                let (dx, dg, db) =
                    batchnorm_train_backward(ctx.inputs[0], ctx.inputs[1], &saved, eps, ctx.grad);
                Ok(vec![Some(dx), Some(dg), Some(db)])
            }),
        )?;
        Ok((var, stats))
    }

    /// Eval-mode batch norm with fixed statistics; differentiable in `x`,
    /// `gamma` and `beta`.
    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        p: &BnParams<T>,
    ) -> Result<Var> {
        let mut frozen = p.clone();
        frozen.gamma = self.value(gamma).clone();
        frozen.beta = self.value(beta).clone();
        let y = batchnorm_eval(self.value(x), &frozen)?;
        let mean = p.running_mean.clone();
        let var = p.running_var.clone();
        let eps = T::from_f64(p.eps);
        self.push_op(
            y,
            &[x, gamma, beta],
            Box::new(move |ctx| {
                let x = ctx.inputs[0];
                let gamma = ctx.inputs[1].data();
                let s = x.shape();
                let plane = s.plane();
                let mut dx = vec![T::zero(); x.len()];
                let mut dg = vec![T::zero(); s.c];
                let mut db = vec![T::zero(); s.c];
                for n in 0..s.n {
                    for c in 0..s.c {
                        let inv_std = T::one() / (var[c] + eps).sqrt();
                        let start = (n * s.c + c) * plane;
                        for i in start..start + plane {
                            let g = ctx.grad[i];
                            dx[i] = g * gamma[c] * inv_std;
                            dg[c] += g * (x.data()[i] - mean[c]) * inv_std;
                            db[c] += g;
                        }
                    }
                }
                Ok(vec![Some(dx), Some(dg), Some(db)])
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn train_mode_standardizes_channels() {
        let mut rng = Rng::new(1);
        let x = Tensor::<f64>::randn([4, 3, 5, 5], &mut rng, 2.0, 3.0).unwrap();
        let mut p = BnParams::new(3).unwrap();
        let y = batchnorm(&x, &mut p, Mode::Train).unwrap();
        let stats = batch_stats(&y).unwrap();
        for c in 0..3 {
            assert!(stats.mean[c].abs() < 1e-6);
            // eps shrinks the variance slightly below one
            let expected = 1.0 / (1.0 + p.eps / batch_stats(&x).unwrap().var[c]);
            assert!((stats.var[c] - expected).abs() < 1e-4);
            assert!((stats.var[c] - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn eval_mode_with_unit_stats_is_near_identity() {
        let mut rng = Rng::new(2);
        let x = Tensor::<f64>::randn([2, 2, 3, 3], &mut rng, 0.0, 1.0).unwrap();
        let p = BnParams::new(2).unwrap();
        let y = batchnorm_eval(&x, &p).unwrap();
        let k = 1.0 / (1.0 + p.eps).sqrt();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b * k).abs() < 1e-12);
        }
    }

    #[test]
    fn running_stats_ema() {
        let x = Tensor::<f64>::from_vec([1, 1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut p = BnParams::new(1).unwrap();
        batchnorm(&x, &mut p, Mode::Train).unwrap();
        assert!((p.running_mean[0] - 0.25).abs() < 1e-12);
        // unbiased variance of 1..4 is 5/3
        assert!((p.running_var[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_value_per_channel_rejected_in_train() {
        let x = Tensor::<f32>::zeros([1, 2, 1, 1]).unwrap();
        let mut p = BnParams::new(2).unwrap();
        assert!(batchnorm(&x, &mut p, Mode::Train).is_err());
        assert!(batchnorm(&x, &mut p, Mode::Eval).is_ok());
    }

    #[test]
    fn eval_is_per_channel_affine() {
        let mut rng = Rng::new(3);
        let x = Tensor::<f32>::randn([2, 3, 4, 4], &mut rng, 0.0, 1.0).unwrap();
        let mut p = BnParams::<f32>::new(3).unwrap();
        p.gamma = Tensor::randn([1, 3, 1, 1], &mut rng, 1.0, 0.5).unwrap();
        p.beta = Tensor::randn([1, 3, 1, 1], &mut rng, 0.0, 0.5).unwrap();
        p.running_mean = vec![0.3, -0.2, 0.1];
        p.running_var = vec![0.5, 2.0, 1.5];
        let alpha = 1.7f32;
        let zero = batchnorm_eval(&x.map(|_| 0.0), &p).unwrap();
        let base = batchnorm_eval(&x, &p).unwrap();
        let scaled = batchnorm_eval(&x.map(|v| v * alpha), &p).unwrap();
        for i in 0..x.len() {
            let lhs = scaled.data()[i] - zero.data()[i];
            let rhs = alpha * (base.data()[i] - zero.data()[i]);
            assert!((lhs - rhs).abs() < 1e-5);
        }
    }

    #[test]
    fn channel_mismatch() {
        let x = Tensor::<f32>::zeros([2, 3, 2, 2]).unwrap();
        let mut p = BnParams::new(2).unwrap();
        assert!(matches!(
            batchnorm(&x, &mut p, Mode::Train),
            Err(Error::ChannelMismatch { .. })
        ));
    }
}
