//! Activation functions: MTLU and the families it is compared against.

pub mod apl;
pub mod maxout;
pub mod mtlu;
pub mod plf;
pub mod prelu;

use std::fmt;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub use apl::{apl_backward, apl_forward, AplParams};
pub use maxout::{maxout_backward, maxout_forward};
pub use mtlu::{
    mtlu_backward, mtlu_forward, mtlu_init_relu, relu_params, BinGeometry, GradNorm, MtluParams,
    DEFAULT_BINS, DEFAULT_BIN_WIDTH,
};
pub use plf::{plf_backward, plf_forward, AnchorGrid, PlfParams, DEFAULT_PLF_INTERVAL};
pub use prelu::{prelu_backward, prelu_forward, PreluParams, DEFAULT_PRELU_SLOPE};

pub fn relu_forward<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

impl<T: Real> Tape<T> {
    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let y = relu_forward(self.value(x));
        self.push_op(
            y,
            &[x],
            Box::new(|ctx| {
                let dx = ctx.inputs[0]
                    .data()
                    .iter()
                    .zip(ctx.grad)
                    .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                    .collect();
                Ok(vec![Some(dx)])
            }),
        )
    }
}

/// Activation family and its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActivationSpec {
    Relu,
    Prelu,
    Mtlu {
        bins: usize,
        bin_width: f64,
        grad_norm: GradNorm,
        /// One function for all channels instead of one per channel.
        shared: bool,
    },
    Apl {
        kernels: usize,
    },
    Plf {
        segments: usize,
        interval: f64,
    },
    Maxout,
}

impl Default for ActivationSpec {
    fn default() -> Self {
        ActivationSpec::mtlu(DEFAULT_BINS, DEFAULT_BIN_WIDTH)
    }
}

impl ActivationSpec {
    pub fn mtlu(bins: usize, bin_width: f64) -> Self {
        ActivationSpec::Mtlu {
            bins,
            bin_width,
            grad_norm: GradNorm::default(),
            shared: false,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ActivationSpec::Relu => "relu",
            ActivationSpec::Prelu => "prelu",
            ActivationSpec::Mtlu { .. } => "mtlu",
            ActivationSpec::Apl { .. } => "apl",
            ActivationSpec::Plf { .. } => "plf",
            ActivationSpec::Maxout => "maxout",
        }
    }

    /// Channels produced for `channels` inputs; MaxOut halves them.
    pub fn output_channels(&self, channels: usize) -> Result<usize> {
        match self {
            ActivationSpec::Maxout if !channels.is_multiple_of(2) => Err(Error::Divisibility {
                what: "maxout channel count",
                value: channels,
                divisor: 2,
            }),
            ActivationSpec::Maxout => Ok(channels / 2),
            _ => Ok(channels),
        }
    }

    /// Learnable scalars of one activation layer over `channels` feature maps.
    pub fn param_count(&self, channels: usize) -> usize {
        match *self {
            ActivationSpec::Relu | ActivationSpec::Maxout => 0,
            ActivationSpec::Prelu => channels,
            ActivationSpec::Mtlu { bins, shared, .. } => {
                2 * bins * if shared { 1 } else { channels }
            }
            ActivationSpec::Apl { kernels } => 2 * kernels * channels,
            ActivationSpec::Plf { segments, .. } => (segments + 1) * channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationSpec::Mtlu {
                bins, bin_width, ..
            } => BinGeometry::centered(bins, bin_width).map(|_| ()),
            ActivationSpec::Plf { segments, interval } => {
                AnchorGrid::centered(segments, interval).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// Fresh parameters. MTLU, APL and PLF start out equal to ReLU.
    pub fn instantiate<T: Real>(&self, channels: usize) -> Result<Activation<T>> {
        Ok(match *self {
            ActivationSpec::Relu => Activation::Relu,
            ActivationSpec::Maxout => {
                self.output_channels(channels)?;
                Activation::Maxout
            }
            ActivationSpec::Prelu => {
                Activation::Prelu(PreluParams::new(channels, DEFAULT_PRELU_SLOPE)?)
            }
            ActivationSpec::Mtlu {
                bins,
                bin_width,
                grad_norm,
                shared,
            } => {
                let mut p = relu_params(
                    if shared { 1 } else { channels },
                    BinGeometry::centered(bins, bin_width)?,
                )?;
                p.grad_norm = grad_norm;
                Activation::Mtlu(p)
            }
            ActivationSpec::Apl { kernels } => Activation::Apl(AplParams::new(channels, kernels)?),
            ActivationSpec::Plf { segments, interval } => Activation::Plf(PlfParams::relu(
                channels,
                AnchorGrid::centered(segments, interval)?,
            )?),
        })
    }
}

impl fmt::Display for ActivationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationSpec::Mtlu {
                bins, bin_width, ..
            } => write!(f, "mtlu{bins}(w={bin_width})"),
            ActivationSpec::Apl { kernels } => write!(f, "apl{kernels}"),
            ActivationSpec::Plf { segments, .. } => write!(f, "plf{segments}"),
            other => f.write_str(other.kind()),
        }
    }
}

/// Learnable parameters of a 3x3 (or `kernel` x `kernel`) convolution layer.
pub fn conv_param_count(
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    bias: bool,
) -> usize {
    out_channels * in_channels * kernel * kernel + if bias { out_channels } else { 0 }
}

/// Learnable scalars of one activation layer of the given family.
pub fn param_count(spec: &ActivationSpec, channels: usize) -> usize {
    spec.param_count(channels)
}

/// An activation layer with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Activation<T> {
    Relu,
    Prelu(PreluParams<T>),
    Mtlu(MtluParams<T>),
    Apl(AplParams<T>),
    Plf(PlfParams<T>),
    Maxout,
}

impl<T: Real> Activation<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Prelu(_) => "prelu",
            Activation::Mtlu(_) => "mtlu",
            Activation::Apl(_) => "apl",
            Activation::Plf(_) => "plf",
            Activation::Maxout => "maxout",
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Activation::Relu => Ok(relu_forward(x)),
            Activation::Prelu(p) => prelu_forward(x, &p.alpha),
            Activation::Mtlu(p) => mtlu_forward(x, p),
            Activation::Apl(p) => apl_forward(x, &p.a, &p.b),
            Activation::Plf(p) => plf_forward(x, &p.values, &p.grid),
            Activation::Maxout => maxout_forward(x),
        }
    }

    /// Named learnable tensors in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Activation::Relu | Activation::Maxout => vec![],
            Activation::Prelu(p) => vec![("alpha", &p.alpha)],
            Activation::Mtlu(p) => vec![("slopes", &p.slopes), ("offsets", &p.offsets)],
            Activation::Apl(p) => vec![("a", &p.a), ("b", &p.b)],
            Activation::Plf(p) => vec![("values", &p.values)],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Activation::Relu | Activation::Maxout => vec![],
            Activation::Prelu(p) => vec![&mut p.alpha],
            Activation::Mtlu(p) => vec![&mut p.slopes, &mut p.offsets],
            Activation::Apl(p) => vec![&mut p.a, &mut p.b],
            Activation::Plf(p) => vec![&mut p.values],
        }
    }

    /// Records the activation on `tape`; `params` are the tape handles of
    /// [`Activation::params`], in the same order.
    pub fn record(&self, tape: &mut Tape<T>, x: Var, params: &[Var]) -> Result<Var> {
        if params.len() != self.params().len() {
            return Err(Error::Internal(format!(
                "{} activation expects {} parameter handles, got {}",
                self.kind(),
                self.params().len(),
                params.len()
            )));
        }
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Maxout => tape.maxout(x),
            Activation::Prelu(_) => tape.prelu(x, params[0]),
            Activation::Mtlu(p) => tape.mtlu(x, params[0], params[1], p.geometry, p.grad_norm),
            Activation::Apl(_) => tape.apl(x, params[0], params[1]),
            Activation::Plf(p) => tape.plf(x, params[0], p.grid),
        }
    }

    pub fn cast<U: Real>(&self) -> Activation<U> {
        match self {
            Activation::Relu => Activation::Relu,
            Activation::Maxout => Activation::Maxout,
            Activation::Prelu(p) => Activation::Prelu(p.cast()),
            Activation::Mtlu(p) => Activation::Mtlu(p.cast()),
            Activation::Apl(p) => Activation::Apl(p.cast()),
            Activation::Plf(p) => Activation::Plf(p.cast()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn mtlu_parameter_count_for_64_channels() {
        assert_eq!(param_count(&ActivationSpec::mtlu(40, 0.05), 64), 5120);
    }

    #[test]
    fn mtlu_is_under_a_seventh_of_a_conv_layer() {
        let conv = conv_param_count(64, 64, 3, false);
        assert_eq!(conv, 36864);
        assert!(conv > 7 * 5120);
    }

    #[test]
    fn other_counts() {
        assert_eq!(param_count(&ActivationSpec::Prelu, 64), 64);
        assert_eq!(param_count(&ActivationSpec::Relu, 64), 0);
        assert_eq!(param_count(&ActivationSpec::Maxout, 64), 0);
        assert_eq!(param_count(&ActivationSpec::Apl { kernels: 5 }, 64), 640);
        assert_eq!(
            param_count(
                &ActivationSpec::Plf {
                    segments: 40,
                    interval: 0.05
                },
                64
            ),
            41 * 64
        );
    }

    #[test]
    fn instantiated_counts_match_formula() {
        let specs = [
            ActivationSpec::Relu,
            ActivationSpec::Prelu,
            ActivationSpec::mtlu(20, 0.1),
            ActivationSpec::Apl { kernels: 3 },
            ActivationSpec::Plf {
                segments: 10,
                interval: 0.05,
            },
            ActivationSpec::Maxout,
        ];
        for spec in specs {
            let act = spec.instantiate::<f32>(8).unwrap();
            let n: usize = act.params().iter().map(|(_, t)| t.len()).sum();
            assert_eq!(n, spec.param_count(8), "{spec}");
        }
    }

    #[test]
    fn relu_tape_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.variable(Tensor::from_vec([1, 1, 1, 3], vec![-1.0, 0.0, 2.0]).unwrap());
        let y = tape.relu(x).unwrap();
        let s = tape.sum(y).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn fresh_parametric_activations_equal_relu() {
        let x = Tensor::<f64>::randn([2, 4, 5, 5], &mut Rng::new(3), 0.0, 1.5).unwrap();
        let relu = relu_forward(&x);
        for spec in [
            ActivationSpec::mtlu(40, 0.05),
            ActivationSpec::Apl { kernels: 4 },
            ActivationSpec::Plf {
                segments: 40,
                interval: 0.05,
            },
        ] {
            let y = spec.instantiate::<f64>(4).unwrap().forward(&x).unwrap();
            for (a, b) in y.data().iter().zip(relu.data()) {
                assert!((a - b).abs() < 1e-12, "{spec}");
            }
        }
    }
}
