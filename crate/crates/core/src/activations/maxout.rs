use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::{Shape, Tensor};

fn out_shape(s: Shape) -> Result<Shape> {
    if !s.c.is_multiple_of(2) {
        return Err(Error::Divisibility {
            what: "maxout channel count",
            value: s.c,
            divisor: 2,
        });
    }
    Ok(Shape::new(s.n, s.c / 2, s.h, s.w))
}

/// Output channel `j` is the elementwise max of input channels `2j` and `2j+1`.
pub fn maxout_forward<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    let o = out_shape(s)?;
    let mut out = Tensor::zeros(o)?;
    for n in 0..s.n {
        for j in 0..o.c {
            let (a, b) = (x.plane(n, 2 * j), x.plane(n, 2 * j + 1));
            let start = (n * o.c + j) * o.plane();
            for (i, dst) in out.data_mut()[start..start + o.plane()]
                .iter_mut()
                .enumerate()
            {
                *dst = if a[i] >= b[i] { a[i] } else { b[i] };
            }
        }
    }
    Ok(out)
}

/// Routes each output gradient to the winning input; ties go to the lower
/// channel.
pub fn maxout_backward<T: Real>(x: &Tensor<T>, dy: &[T]) -> Result<Vec<T>> {
    let s = x.shape();
    let o = out_shape(s)?;
    if dy.len() != o.numel() {
        return Err(Error::shape("maxout_backward: gradient length"));
    }
    let mut dx = vec![T::zero(); x.len()];
    let plane = s.plane();
    for n in 0..s.n {
        for j in 0..o.c {
            let (a, b) = (x.plane(n, 2 * j), x.plane(n, 2 * j + 1));
            let ga = s.index(n, 2 * j, 0, 0);
            let gb = ga + plane;
            let go = (n * o.c + j) * plane;
            for i in 0..plane {
                if a[i] >= b[i] {
                    dx[ga + i] = dy[go + i];
                } else {
                    dx[gb + i] = dy[go + i];
                }
            }
        }
    }
    Ok(dx)
}

impl<T: Real> Tape<T> {
    pub fn maxout(&mut self, x: Var) -> Result<Var> {
        let y = maxout_forward(self.value(x))?;
        self.push_op(
            y,
            &[x],
            Box::new(|ctx| Ok(vec![Some(maxout_backward(ctx.inputs[0], ctx.grad)?)])),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn opposite_pair_gives_abs() {
        let mut rng = Rng::new(1);
        let x = Tensor::<f64>::randn([1, 1, 4, 4], &mut rng, 0.0, 1.0).unwrap();
        let mut data = x.data().to_vec();
        data.extend(x.data().iter().map(|v| -v));
        let pair = Tensor::from_vec([1, 2, 4, 4], data).unwrap();
        assert_eq!(maxout_forward(&pair).unwrap(), x.map(|v| v.abs()));
    }

    #[test]
    fn duplicate_channels_are_identity() {
        let mut rng = Rng::new(2);
        let x = Tensor::<f32>::randn([2, 1, 3, 3], &mut rng, 0.0, 1.0).unwrap();
        let mut data = Vec::new();
        for n in 0..2 {
            data.extend_from_slice(x.plane(n, 0));
            data.extend_from_slice(x.plane(n, 0));
        }
        let dup = Tensor::from_vec([2, 2, 3, 3], data).unwrap();
        assert_eq!(maxout_forward(&dup).unwrap(), x);
    }

    #[test]
    fn gradient_routing_and_ties() {
        let x = Tensor::from_vec([1, 2, 1, 3], vec![1.0, 5.0, 2.0, 3.0, 0.0, 2.0]).unwrap();
        let dx = maxout_backward(&x, &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(dx, vec![0.0, 20.0, 30.0, 10.0, 0.0, 0.0]);
    }

    #[test]
    fn odd_channels_rejected() {
        let x = Tensor::<f32>::zeros([1, 3, 2, 2]).unwrap();
        assert!(maxout_forward(&x).is_err());
    }
}
