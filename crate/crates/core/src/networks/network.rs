//! Instantiated networks: parameters, forward passes and the parameter registry.

use super::spec::{LayerSpec, NetworkSpec};
use crate::activations::Activation;
use crate::data::resize::upscale_tensor;
use crate::error::{Error, Result};
use crate::ops::{
    add, batchnorm_eval, conv2d, pixel_shuffle, pixel_unshuffle, sub, BatchStats, BnParams,
    ConvParams, Mode,
};
use crate::real::Real;
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv(ConvParams<T>),
    BatchNorm(BnParams<T>),
    Activation(Activation<T>),
    Shuffle(usize),
    Unshuffle(usize),
    ResidualMark,
    ResidualAdd,
    SubtractFromInput,
    AddUpscaledInput(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Conv,
    BatchNorm,
    Activation,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Conv => "conv",
            ParamKind::BatchNorm => "bn",
            ParamKind::Activation => "activation",
        }
    }
}

/// One learnable tensor as the optimizer sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamInfo {
    /// e.g. `layer3.conv.weight`
    pub name: String,
    pub kind: ParamKind,
    /// Whether weight decay applies. Only convolution parameters decay.
    pub decay: bool,
    pub len: usize,
}

/// Handles produced by [`Network::record`].
#[derive(Clone, Debug)]
pub struct Recorded<T> {
    pub output: Var,
    /// Tape handles of every learnable tensor, in registry order.
    pub params: Vec<Var>,
    /// Batch statistics of each batch-norm layer (train mode only).
    pub batch_stats: Vec<BatchStats<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    layers: Vec<Layer<T>>,
}

impl<T: Real> Network<T> {
    /// Kaiming-initialized convolutions, identity batch norm and activations
    /// that start out as ReLU.
    pub fn build(spec: NetworkSpec, rng: &mut Rng) -> Result<Self> {
        let layers = spec
            .layers()?
            .into_iter()
            .map(|l| {
                Ok(match l {
                    LayerSpec::Conv {
                        in_channels,
                        out_channels,
                        kernel,
                    } => Layer::Conv(ConvParams::kaiming(in_channels, out_channels, kernel, rng)?),
                    LayerSpec::BatchNorm { channels } => Layer::BatchNorm(BnParams::new(channels)?),
                    LayerSpec::Activation { spec, channels } => {
                        Layer::Activation(spec.instantiate(channels)?)
                    }
                    LayerSpec::Shuffle(r) => Layer::Shuffle(r),
                    LayerSpec::Unshuffle(r) => Layer::Unshuffle(r),
                    LayerSpec::ResidualMark => Layer::ResidualMark,
                    LayerSpec::ResidualAdd => Layer::ResidualAdd,
                    LayerSpec::SubtractFromInput => Layer::SubtractFromInput,
                    LayerSpec::AddUpscaledInput(r) => Layer::AddUpscaledInput(r),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Network { spec, layers })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn registry(&self) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(p) => {
                    for (name, t) in [("weight", &p.weight), ("bias", &p.bias)] {
                        out.push(ParamInfo {
                            name: format!("layer{i}.conv.{name}"),
                            kind: ParamKind::Conv,
                            decay: true,
                            len: t.len(),
                        });
                    }
                }
                Layer::BatchNorm(p) => {
                    for (name, t) in [("gamma", &p.gamma), ("beta", &p.beta)] {
                        out.push(ParamInfo {
                            name: format!("layer{i}.bn.{name}"),
                            kind: ParamKind::BatchNorm,
                            decay: false,
                            len: t.len(),
                        });
                    }
                }
                Layer::Activation(a) => {
                    for (name, t) in a.params() {
                        out.push(ParamInfo {
                            name: format!("layer{i}.{}.{name}", a.kind()),
                            kind: ParamKind::Activation,
                            decay: false,
                            len: t.len(),
                        });
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Learnable tensors in registry order.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(p) => out.extend([&p.weight, &p.bias]),
                Layer::BatchNorm(p) => out.extend([&p.gamma, &p.beta]),
                Layer::Activation(a) => out.extend(a.params().into_iter().map(|(_, t)| t)),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(p) => {
                    out.push(&mut p.weight);
                    out.push(&mut p.bias);
                }
                Layer::BatchNorm(p) => {
                    out.push(&mut p.gamma);
                    out.push(&mut p.beta);
                }
                Layer::Activation(a) => out.extend(a.params_mut()),
                _ => {}
            }
        }
        out
    }

    /// Non-learnable state (batch-norm running mean and variance), in layer order.
    pub fn buffers(&self) -> Vec<&Vec<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            if let Layer::BatchNorm(p) = layer {
                out.push(&p.running_mean);
                out.push(&p.running_var);
            }
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::BatchNorm(p) = layer {
                out.push(&mut p.running_mean);
                out.push(&mut p.running_var);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Activation parameters only.
    pub fn activation_param_count(&self) -> usize {
        self.registry()
            .iter()
            .filter(|p| p.kind == ParamKind::Activation)
            .map(|p| p.len)
            .sum()
    }

    /// Eval-mode inference: batch norm uses running statistics.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.spec.output_shape(x.shape())?;
        let mut stack: Vec<Tensor<T>> = Vec::new();
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = match layer {
                Layer::Conv(p) => conv2d(&cur, &p.weight, &p.bias)?,
                Layer::BatchNorm(p) => batchnorm_eval(&cur, p)?,
                Layer::Activation(a) => a.forward(&cur)?,
                Layer::Shuffle(r) => pixel_shuffle(&cur, *r)?,
                Layer::Unshuffle(r) => pixel_unshuffle(&cur, *r)?,
                Layer::ResidualMark => {
                    stack.push(cur.clone());
                    cur
                }
                Layer::ResidualAdd => {
                    let mark = stack
                        .pop()
                        .ok_or_else(|| Error::Internal("unmatched residual add".into()))?;
                    add(&mark, &cur)?
                }
                Layer::SubtractFromInput => sub(x, &cur)?,
                Layer::AddUpscaledInput(r) => add(&cur, &upscale_tensor(x, *r)?)?,
            };
        }
        Ok(cur)
    }

    /// Records the forward pass on `tape`. Every learnable tensor becomes a
    /// tape variable. Running statistics are not touched; see
    /// [`Network::forward_train`].
    pub fn record(&self, tape: &mut Tape<T>, x: Var, mode: Mode) -> Result<Recorded<T>> {
        self.spec.output_shape(tape.value(x).shape())?;
        let mut params = Vec::new();
        let mut batch_stats = Vec::new();
        let mut stack = Vec::new();
        let mut cur = x;
        for layer in &self.layers {
            cur = match layer {
                Layer::Conv(p) => {
                    let w = tape.variable(p.weight.clone());
                    let b = tape.variable(p.bias.clone());
                    params.extend([w, b]);
                    tape.conv2d(cur, w, b)?
                }
                Layer::BatchNorm(p) => {
                    let g = tape.variable(p.gamma.clone());
                    let b = tape.variable(p.beta.clone());
                    params.extend([g, b]);
                    match mode {
                        Mode::Train => {
                            let (y, stats) = tape.batchnorm_train(cur, g, b, p.eps)?;
                            batch_stats.push(stats);
                            y
                        }
                        Mode::Eval => tape.batchnorm_eval(cur, g, b, p)?,
                    }
                }
                Layer::Activation(a) => {
                    let vars: Vec<Var> = a
                        .params()
                        .into_iter()
                        .map(|(_, t)| tape.variable(t.clone()))
                        .collect();
                    params.extend(&vars);
                    a.record(tape, cur, &vars)?
                }
                Layer::Shuffle(r) => tape.pixel_shuffle(cur, *r)?,
                Layer::Unshuffle(r) => tape.pixel_unshuffle(cur, *r)?,
                Layer::ResidualMark => {
                    stack.push(cur);
                    cur
                }
                Layer::ResidualAdd => {
                    let mark = stack
                        .pop()
                        .ok_or_else(|| Error::Internal("unmatched residual add".into()))?;
                    tape.add(mark, cur)?
                }
                Layer::SubtractFromInput => tape.sub(x, cur)?,
                Layer::AddUpscaledInput(r) => {
                    let up = upscale_tensor(tape.value(x), *r)?;
                    let up = tape.constant(up);
                    tape.add(cur, up)?
                }
            };
        }
        Ok(Recorded {
            output: cur,
            params,
            batch_stats,
        })
    }

    /// Train-mode forward on `tape`; folds the batch statistics into the
    /// running estimates.
    pub fn forward_train(&mut self, tape: &mut Tape<T>, x: Var) -> Result<Recorded<T>> {
        let rec = self.record(tape, x, Mode::Train)?;
        self.apply_batch_stats(&rec.batch_stats)?;
        Ok(rec)
    }

    pub fn apply_batch_stats(&mut self, stats: &[BatchStats<T>]) -> Result<()> {
        let mut it = stats.iter();
        for layer in &mut self.layers {
            if let Layer::BatchNorm(p) = layer {
                let s = it
                    .next()
                    .ok_or_else(|| Error::Internal("missing batch statistics".into()))?;
                p.update_running(s);
            }
        }
        Ok(())
    }

    /// Collects gradients of every learnable tensor after `tape.backward`.
    pub fn gradients(&self, tape: &Tape<T>, rec: &Recorded<T>) -> Result<Vec<Vec<T>>> {
        rec.params
            .iter()
            .zip(self.params())
            .map(|(v, t)| {
                Ok(tape
                    .grad(*v)
                    .map(|g| g.to_vec())
                    .unwrap_or_else(|| vec![T::zero(); t.len()]))
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            spec: self.spec,
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv(p) => Layer::Conv(p.cast()),
                    Layer::BatchNorm(p) => Layer::BatchNorm(p.cast()),
                    Layer::Activation(a) => Layer::Activation(a.cast()),
                    Layer::Shuffle(r) => Layer::Shuffle(*r),
                    Layer::Unshuffle(r) => Layer::Unshuffle(*r),
                    Layer::ResidualMark => Layer::ResidualMark,
                    Layer::ResidualAdd => Layer::ResidualAdd,
                    Layer::SubtractFromInput => Layer::SubtractFromInput,
                    Layer::AddUpscaledInput(r) => Layer::AddUpscaledInput(*r),
                })
                .collect(),
        }
    }
}

pub fn build_fsrnet<T: Real>(
    factor: usize,
    depth: usize,
    width: usize,
    activation: crate::activations::ActivationSpec,
    rng: &mut Rng,
) -> Result<Network<T>> {
    Network::build(NetworkSpec::fsrnet(factor, depth, width, activation), rng)
}

pub fn build_fdnet<T: Real>(
    depth: usize,
    width: usize,
    activation: crate::activations::ActivationSpec,
    rng: &mut Rng,
) -> Result<Network<T>> {
    Network::build(NetworkSpec::fdnet(depth, width, activation), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::{conv_param_count, ActivationSpec};
    use crate::tensor::Shape;

    #[test]
    fn fsrnet_param_count_closed_form() {
        let mut rng = Rng::new(1);
        for r in [2, 3, 4] {
            let net: Network<f32> =
                build_fsrnet(r, 7, 64, ActivationSpec::mtlu(40, 0.05), &mut rng).unwrap();
            let expected = conv_param_count(1, 64, 3, true)
                + 5 * conv_param_count(64, 64, 3, true)
                + conv_param_count(64, r * r, 3, true)
                + 5 * 2 * 64
                + 6 * 64 * 2 * 40;
            assert_eq!(net.param_count(), expected);
            assert_eq!(net.activation_param_count(), 6 * 64 * 80);
        }
    }

    #[test]
    fn registry_matches_params() {
        let net: Network<f32> = build_fdnet(4, 8, ActivationSpec::Prelu, &mut Rng::new(2)).unwrap();
        let reg = net.registry();
        let params = net.params();
        assert_eq!(reg.len(), params.len());
        for (info, t) in reg.iter().zip(params) {
            assert_eq!(info.len, t.len());
            assert_eq!(info.decay, info.kind == ParamKind::Conv);
        }
        assert_eq!(net.buffers().len(), 2 * 2);
    }

    #[test]
    fn forward_shapes() {
        let mut rng = Rng::new(3);
        let net: Network<f32> = build_fsrnet(3, 4, 8, ActivationSpec::Maxout, &mut rng).unwrap();
        let x = Tensor::randn(Shape::new(2, 1, 5, 6), &mut rng, 0.0, 1.0).unwrap();
        assert_eq!(net.forward(&x).unwrap().shape(), Shape::new(2, 1, 15, 18));
        let bad = Tensor::<f32>::zeros([1, 2, 5, 6]).unwrap();
        assert!(matches!(
            net.forward(&bad),
            Err(Error::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn tape_eval_matches_pure_forward() {
        let mut rng = Rng::new(4);
        let net: Network<f64> =
            build_fdnet(4, 8, ActivationSpec::mtlu(40, 0.05), &mut rng).unwrap();
        let x = Tensor::randn(Shape::new(1, 1, 8, 8), &mut rng, 0.5, 0.2).unwrap();
        let pure = net.forward(&x).unwrap();
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        let rec = net.record(&mut tape, xv, Mode::Eval).unwrap();
        assert_eq!(tape.value(rec.output).data(), pure.data());
    }

    #[test]
    fn train_forward_updates_running_stats() {
        let mut rng = Rng::new(5);
        let mut net: Network<f32> = build_fsrnet(2, 3, 4, ActivationSpec::Relu, &mut rng).unwrap();
        let before: Vec<Vec<f32>> = net.buffers().into_iter().cloned().collect();
        let x = Tensor::randn(Shape::new(2, 1, 4, 4), &mut rng, 0.0, 1.0).unwrap();
        let mut tape = Tape::new();
        let xv = tape.constant(x);
        net.forward_train(&mut tape, xv).unwrap();
        let after: Vec<Vec<f32>> = net.buffers().into_iter().cloned().collect();
        assert_ne!(before, after);
    }

    #[test]
    fn denoise_residual_of_zero_net_is_identity() {
        let mut rng = Rng::new(6);
        let mut net: Network<f32> = build_fdnet(3, 4, ActivationSpec::Relu, &mut rng).unwrap();
        for p in net.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let x = Tensor::randn(Shape::new(1, 1, 8, 12), &mut rng, 0.0, 1.0).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
    }
}
