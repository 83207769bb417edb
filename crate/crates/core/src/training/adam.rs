//! Adam with bias correction and L2 weight decay on flagged groups.

use crate::error::{Error, Result};
use crate::networks::ParamInfo;
use crate::real::Real;
use crate::tensor::Tensor;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Optimizer state: first and second moments per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    /// Zeroed moments for tensors of the given lengths.
    pub fn new(lengths: &[usize]) -> Self {
        Adam {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            t: 0,
            m: lengths.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: lengths.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn for_registry(registry: &[ParamInfo]) -> Self {
        Adam::new(&registry.iter().map(|p| p.len).collect::<Vec<_>>())
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.v
    }

    /// One update. For groups with `decay`, `weight_decay * param` is added
    /// to the gradient before the moments are updated. Nothing is modified
    /// if any gradient is non-finite.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[Vec<T>],
        groups: &[ParamInfo],
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        if params.len() != self.m.len()
            || grads.len() != self.m.len()
            || groups.len() != self.m.len()
        {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, got {} params, {} grads, {} groups",
                self.m.len(),
                params.len(),
                grads.len(),
                groups.len()
            )));
        }
        for (i, ((p, g), info)) in params.iter().zip(grads).zip(groups).enumerate() {
            if p.len() != self.m[i].len() || g.len() != p.len() {
                return Err(Error::shape(format!(
                    "{}: param {} / grad {} / state {}",
                    info.name,
                    p.len(),
                    g.len(),
                    self.m[i].len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", info.name)));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let wd = if groups[i].decay { weight_decay } else { 0.0 };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                let w64 = w.as_f64();
                let grad = g[j].as_f64() + wd * w64;
                let mj = b1 * m[j].as_f64() + (1.0 - b1) * grad;
                let vj = b2 * v[j].as_f64() + (1.0 - b2) * grad * grad;
                m[j] = T::from_f64(mj);
                v[j] = T::from_f64(vj);
                let update = lr * (mj / c1) / ((vj / c2).sqrt() + self.eps);
                *w = T::from_f64(w64 - update);
            }
        }
        Ok(())
    }
}
