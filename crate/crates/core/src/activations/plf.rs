//! Piecewise linear function interpolating learned values at fixed,
//! uniformly spaced anchors. Each anchor value shapes the two segments that
//! meet at it. Outside the anchor range the edge segments are extended.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_PLF_INTERVAL: f64 = 0.05;

/// `M` segments between `M + 1` anchors `p_m = first + m * interval`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnchorGrid {
    segments: usize,
    interval: f64,
    first: f64,
}

impl AnchorGrid {
    pub fn new(segments: usize, interval: f64, first: f64) -> Result<Self> {
        if segments == 0 {
            return Err(Error::invalid("PLF needs at least one segment"));
        }
        if !(interval > 0.0) || !interval.is_finite() || !first.is_finite() {
            return Err(Error::invalid(format!(
                "invalid PLF anchor interval {interval}"
            )));
        }
        Ok(AnchorGrid {
            segments,
            interval,
            first,
        })
    }

    /// Anchors symmetric about zero.
    pub fn centered(segments: usize, interval: f64) -> Result<Self> {
        Self::new(segments, interval, -(segments as f64) * interval / 2.0)
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn anchors(&self) -> usize {
        self.segments + 1
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn first(&self) -> f64 {
        self.first
    }

    pub fn position(&self, m: usize) -> f64 {
        self.first + m as f64 * self.interval
    }

    /// Segment index (clamped to the edge segments) and the local coordinate
    /// `t = (x - p_j) / interval`, which leaves `[0, 1]` only when
    /// extrapolating.
    #[inline]
    fn locate<T: Real>(&self, x: T) -> (usize, T) {
        let first = T::from_f64(self.first);
        let step = T::from_f64(self.interval);
        let u = (x - first) / step;
        let q = u.as_f64().max(0.0).min((self.segments - 1) as f64);
        let j = q as usize;
        (j, u - T::from_usize(j))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlfParams<T> {
    pub grid: AnchorGrid,
    /// Anchor values, `(1, C, 1, M + 1)`.
    pub values: Tensor<T>,
}

impl<T: Real> PlfParams<T> {
    /// Anchor values sampled from ReLU.
    pub fn relu(channels: usize, grid: AnchorGrid) -> Result<Self> {
        let values: Vec<T> = (0..channels)
            .flat_map(|_| (0..grid.anchors()).map(move |m| T::from_f64(grid.position(m).max(0.0))))
            .collect();
        Ok(PlfParams {
            grid,
            values: Tensor::from_vec([1, channels, 1, grid.anchors()], values)?,
        })
    }

    pub fn cast<U: Real>(&self) -> PlfParams<U> {
        PlfParams {
            grid: self.grid,
            values: self.values.cast(),
        }
    }
}

fn check<T: Real>(x: &Tensor<T>, values: &Tensor<T>, grid: &AnchorGrid) -> Result<()> {
    if values.shape().w != grid.anchors() {
        return Err(Error::shape(format!(
            "PLF values {} do not hold {} anchors",
            values.shape(),
            grid.anchors()
        )));
    }
    if values.shape().c != x.shape().c {
        return Err(Error::ChannelMismatch {
            expected: values.shape().c,
            got: x.shape().c,
        });
    }
    Ok(())
}

pub fn plf_forward<T: Real>(
    x: &Tensor<T>,
    values: &Tensor<T>,
    grid: &AnchorGrid,
) -> Result<Tensor<T>> {
    check(x, values, grid)?;
    let s = x.shape();
    let plane = s.plane();
    let m = grid.anchors();
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
        let v = &values.data()[c * m..(c + 1) * m];
        for (o, &x) in o.iter_mut().zip(xs) {
            let (j, t) = grid.locate(x);
            *o = (T::one() - t) * v[j] + t * v[j + 1];
        }
    }
    Ok(out)
}

/// Returns `(dx, dvalues)`. Every input feeds the two anchors bracketing it,
/// with barycentric weights `1 - t` and `t`.
pub fn plf_backward<T: Real>(
    x: &Tensor<T>,
    dy: &[T],
    values: &Tensor<T>,
    grid: &AnchorGrid,
) -> Result<(Vec<T>, Vec<T>)> {
    check(x, values, grid)?;
    if dy.len() != x.len() {
        return Err(Error::shape("plf_backward: gradient length"));
    }
    let s = x.shape();
    let plane = s.plane();
    let m = grid.anchors();
    let step = T::from_f64(grid.interval());
    let mut dx = vec![T::zero(); x.len()];
    let mut dv = vec![T::zero(); values.len()];
    if plane == 0 {
        return Ok((dx, dv));
    }
    for (i, ((d, xs), gs)) in dx
        .chunks_mut(plane)
        .zip(x.data().chunks(plane))
        .zip(dy.chunks(plane))
        .enumerate()
    {
        let c = i % s.c;
        let v = &values.data()[c * m..(c + 1) * m];
        let dv = &mut dv[c * m..(c + 1) * m];
        for ((d, &x), &g) in d.iter_mut().zip(xs).zip(gs) {
            let (j, t) = grid.locate(x);
            *d = g * (v[j + 1] - v[j]) / step;
            dv[j] += g * (T::one() - t);
            dv[j + 1] += g * t;
        }
    }
    Ok((dx, dv))
}

impl<T: Real> Tape<T> {
    pub fn plf(&mut self, x: Var, values: Var, grid: AnchorGrid) -> Result<Var> {
        let y = plf_forward(self.value(x), self.value(values), &grid)?;
        self.push_op(
            y,
            &[x, values],
            Box::new(move |ctx| {
                let (dx, dv) = plf_backward(ctx.inputs[0], ctx.grad, ctx.inputs[1], &grid)?;
                Ok(vec![Some(dx), Some(dv)])
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> AnchorGrid {
        AnchorGrid::centered(40, DEFAULT_PLF_INTERVAL).unwrap()
    }

    #[test]
    fn identity_samples_give_identity_in_range() {
        let g = grid();
        let values: Vec<f64> = (0..g.anchors()).map(|m| g.position(m)).collect();
        let values = Tensor::from_vec([1, 1, 1, g.anchors()], values).unwrap();
        let xs: Vec<f64> = (0..200).map(|i| -0.995 + i as f64 * 0.01).collect();
        let x = Tensor::from_vec([1, 1, 1, xs.len()], xs.clone()).unwrap();
        let y = plf_forward(&x, &values, &g).unwrap();
        for (a, b) in y.data().iter().zip(&xs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_is_mean_of_anchor_values() {
        let g = AnchorGrid::new(2, 1.0, 0.0).unwrap();
        let values = Tensor::from_vec([1, 1, 1, 3], vec![2.0, 6.0, -1.0]).unwrap();
        let x = Tensor::from_vec([1, 1, 1, 2], vec![0.5, 1.5]).unwrap();
        assert_eq!(plf_forward(&x, &values, &g).unwrap().data(), &[4.0, 2.5]);
    }

    #[test]
    fn extrapolates_edge_segments() {
        let g = AnchorGrid::new(2, 1.0, 0.0).unwrap();
        let values = Tensor::from_vec([1, 1, 1, 3], vec![2.0, 6.0, -1.0]).unwrap();
        let x = Tensor::from_vec([1, 1, 1, 2], vec![-1.0, 3.0]).unwrap();
        assert_eq!(plf_forward(&x, &values, &g).unwrap().data(), &[-2.0, -8.0]);
    }

    #[test]
    fn one_anchor_moves_two_segments() {
        let g = AnchorGrid::new(2, 1.0, 0.0).unwrap();
        let x = Tensor::from_vec([1, 1, 1, 2], vec![0.5, 1.5]).unwrap();
        let values = Tensor::<f64>::zeros([1, 1, 1, 3]).unwrap();
        let (_, dv) = plf_backward(&x, &[1.0, 1.0], &values, &g).unwrap();
        assert_eq!(dv, vec![0.5, 1.0, 0.5]);
    }

    #[test]
    fn relu_init_matches_relu() {
        let p = PlfParams::<f64>::relu(1, grid()).unwrap();
        let xs: Vec<f64> = (0..100).map(|i| -3.0 + i as f64 * 0.0613).collect();
        let x = Tensor::from_vec([1, 1, 1, xs.len()], xs.clone()).unwrap();
        let y = plf_forward(&x, &p.values, &p.grid).unwrap();
        for (a, b) in y.data().iter().zip(&xs) {
            assert!((a - b.max(0.0)).abs() < 1e-12);
        }
    }
}
