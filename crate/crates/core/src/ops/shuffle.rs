//! Sub-pixel shuffle and its inverse.
//!
//! Channel order is `dy`-major: `out(n, c, h*r + dy, w*r + dx) =
//! in(n, c*r*r + dy*r + dx, h, w)`. Checkpoints depend on this order.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::{Shape, Tensor};

fn check_factor(r: usize) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("shuffle factor must be positive"));
    }
    Ok(())
}

/// Output shape of [`pixel_shuffle`].
pub fn shuffled_shape(s: Shape, r: usize) -> Result<Shape> {
    check_factor(r)?;
    if !s.c.is_multiple_of(r * r) {
        return Err(Error::Divisibility {
            what: "channel count",
            value: s.c,
            divisor: r * r,
        });
    }
    Ok(Shape::new(s.n, s.c / (r * r), s.h * r, s.w * r))
}

/// Output shape of [`pixel_unshuffle`].
pub fn unshuffled_shape(s: Shape, r: usize) -> Result<Shape> {
    check_factor(r)?;
    for (what, value) in [("height", s.h), ("width", s.w)] {
        if value % r != 0 {
            return Err(Error::Divisibility {
                what,
                value,
                divisor: r,
            });
        }
    }
    Ok(Shape::new(s.n, s.c * r * r, s.h / r, s.w / r))
}

/// Calls `f(low_res_index, high_res_index)` for every element, where the
/// low-resolution tensor has shape `lo` and the high-resolution one `hi`.
fn for_each_pair(lo: Shape, hi: Shape, r: usize, mut f: impl FnMut(usize, usize)) {
    for n in 0..hi.n {
        for c in 0..hi.c {
            for dy in 0..r {
                for dx in 0..r {
                    let lc = c * r * r + dy * r + dx;
                    for h in 0..lo.h {
                        for w in 0..lo.w {
                            f(
                                lo.index(n, lc, h, w),
                                hi.index(n, c, h * r + dy, w * r + dx),
                            );
                        }
                    }
                }
            }
        }
    }
}

/// `(N, C, H, W) -> (N, C/r², H·r, W·r)`.
pub fn pixel_shuffle<T: Real>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let hi = shuffled_shape(x.shape(), r)?;
    let mut out = Tensor::zeros(hi)?;
    let src = x.data();
    let dst = out.data_mut();
    for_each_pair(x.shape(), hi, r, |l, h| dst[h] = src[l]);
    Ok(out)
}

/// `(N, C, H, W) -> (N, C·r², H/r, W/r)`; exact inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Real>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let lo = unshuffled_shape(x.shape(), r)?;
    let mut out = Tensor::zeros(lo)?;
    let src = x.data();
    let dst = out.data_mut();
    for_each_pair(lo, x.shape(), r, |l, h| dst[l] = src[h]);
    Ok(out)
}

impl<T: Real> Tape<T> {
    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let y = pixel_shuffle(self.value(x), r)?;
        let hi = y.shape();
        self.push_op(
            y,
            &[x],
            Box::new(move |ctx| {
                let g = Tensor::from_vec(hi, ctx.grad.to_vec())?;
                Ok(vec![Some(pixel_unshuffle(&g, r)?.into_data())])
            }),
        )
    }

    pub fn pixel_unshuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let y = pixel_unshuffle(self.value(x), r)?;
        let lo = y.shape();
        self.push_op(
            y,
            &[x],
            Box::new(move |ctx| {
                let g = Tensor::from_vec(lo, ctx.grad.to_vec())?;
                Ok(vec![Some(pixel_shuffle(&g, r)?.into_data())])
            }),
        )
    }
}
