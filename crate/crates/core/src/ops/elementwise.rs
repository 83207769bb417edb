use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub fn add<T: Real>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    x.ensure_same_shape(y, "add")?;
    let data = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| a + b)
        .collect();
    Tensor::from_vec(x.shape(), data)
}

pub fn sub<T: Real>(x: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    x.ensure_same_shape(y, "sub")?;
    let data = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| a - b)
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Mean squared error over all elements.
pub fn mse<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    pred.ensure_same_shape(target, "mse_loss")?;
    if pred.is_empty() {
        return Err(Error::shape("mse_loss of empty tensors"));
    }
    let sum: T = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(sum / T::from_usize(pred.len()))
}

impl<T: Real> Tape<T> {
    pub fn add(&mut self, x: Var, y: Var) -> Result<Var> {
        let out = add(self.value(x), self.value(y))?;
        self.push_op(
            out,
            &[x, y],
            Box::new(|ctx| {
                Ok(vec![
                    ctx.needs[0].then(|| ctx.grad.to_vec()),
                    ctx.needs[1].then(|| ctx.grad.to_vec()),
                ])
            }),
        )
    }

    /// `x - y`.
    pub fn sub(&mut self, x: Var, y: Var) -> Result<Var> {
        let out = sub(self.value(x), self.value(y))?;
        self.push_op(
            out,
            &[x, y],
            Box::new(|ctx| {
                Ok(vec![
                    ctx.needs[0].then(|| ctx.grad.to_vec()),
                    ctx.needs[1].then(|| ctx.grad.iter().map(|&g| -g).collect()),
                ])
            }),
        )
    }

    /// Scalar mean squared error; gradient `2 (pred - target) / count`.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let loss = mse(self.value(pred), self.value(target))?;
        self.push_op(
            Tensor::scalar(loss),
            &[pred, target],
            Box::new(|ctx| {
                let (p, t) = (ctx.inputs[0].data(), ctx.inputs[1].data());
                let k = T::from_f64(2.0) * ctx.grad[0] / T::from_usize(p.len());
                let d: Vec<T> = p.iter().zip(t).map(|(&a, &b)| k * (a - b)).collect();
                let dt = ctx.needs[1].then(|| d.iter().map(|&v| -v).collect());
                Ok(vec![Some(d), dt])
            }),
        )
    }
}
