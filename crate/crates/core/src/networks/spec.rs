//! Declarative description of the restoration networks.

use crate::activations::ActivationSpec;
use crate::error::{Error, Result};
use crate::ops::{shuffled_shape, unshuffled_shape};
use crate::tensor::Shape;

/// Shuffle factor FDnet uses to move its trunk to low resolution.
pub const DENOISE_SHUFFLE: usize = 4;
pub const DEFAULT_WIDTH: usize = 64;
pub const KERNEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// Low-resolution luminance in, `factor`x larger estimate out.
    SuperResolution { factor: usize },
    /// Noisy image in, clean estimate of the same size out.
    Denoise,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::SuperResolution { .. } => "sr",
            Task::Denoise => "denoise",
        }
    }
}

/// What FDnet's last convolution predicts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DenoiseTarget {
    /// The noise; the output is `input - prediction`.
    #[default]
    NoiseResidual,
    /// The clean image directly.
    Direct,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkSpec {
    pub task: Task,
    /// Number of convolution layers.
    pub depth: usize,
    /// Feature maps in the trunk.
    pub width: usize,
    /// Image channels.
    pub channels: usize,
    pub activation: ActivationSpec,
    /// FSRnet only: add a bicubic upscaling of the input to the output.
    pub bicubic_skip: bool,
    /// FDnet only.
    pub denoise_target: DenoiseTarget,
}

impl NetworkSpec {
    pub fn fsrnet(factor: usize, depth: usize, width: usize, activation: ActivationSpec) -> Self {
        NetworkSpec {
            task: Task::SuperResolution { factor },
            depth,
            width,
            channels: 1,
            activation,
            bicubic_skip: false,
            denoise_target: DenoiseTarget::default(),
        }
    }

    pub fn fdnet(depth: usize, width: usize, activation: ActivationSpec) -> Self {
        NetworkSpec {
            task: Task::Denoise,
            depth,
            width,
            channels: 1,
            activation,
            bicubic_skip: false,
            denoise_target: DenoiseTarget::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 3 {
            return Err(Error::invalid(format!(
                "depth {} is too shallow; head, trunk and reconstruction need at least 3 layers",
                self.depth
            )));
        }
        if self.width == 0 || self.channels == 0 {
            return Err(Error::invalid("width and channel count must be positive"));
        }
        if let Task::SuperResolution { factor } = self.task {
            if !(2..=4).contains(&factor) {
                return Err(Error::invalid(format!(
                    "SR factor must be 2, 3 or 4, got {factor}"
                )));
            }
        }
        self.activation.validate()?;
        self.activation.output_channels(self.width)?;
        Ok(())
    }

    /// Channels after the trunk activations (MaxOut halves the width).
    pub fn feature_channels(&self) -> Result<usize> {
        self.activation.output_channels(self.width)
    }

    /// Spatial multiple every input side must be divisible by.
    pub fn input_multiple(&self) -> usize {
        match self.task {
            Task::SuperResolution { .. } => 1,
            Task::Denoise => DENOISE_SHUFFLE,
        }
    }

    /// Output side length for an input side length.
    pub fn scale(&self) -> usize {
        match self.task {
            Task::SuperResolution { factor } => factor,
            Task::Denoise => 1,
        }
    }

    /// The layer sequence this spec describes.
    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let feats = self.feature_channels()?;
        let act = self.activation;
        let trunk = |layers: &mut Vec<LayerSpec>| {
            for _ in 0..self.depth - 2 {
                layers.push(LayerSpec::Conv {
                    in_channels: feats,
                    out_channels: self.width,
                    kernel: KERNEL,
                });
                layers.push(LayerSpec::BatchNorm {
                    channels: self.width,
                });
                layers.push(LayerSpec::Activation {
                    spec: act,
                    channels: self.width,
                });
            }
        };
        let mut layers = Vec::new();
        match self.task {
            Task::SuperResolution { factor } => {
                layers.push(LayerSpec::Conv {
                    in_channels: self.channels,
                    out_channels: self.width,
                    kernel: KERNEL,
                });
                layers.push(LayerSpec::Activation {
                    spec: act,
                    channels: self.width,
                });
                layers.push(LayerSpec::ResidualMark);
                trunk(&mut layers);
                layers.push(LayerSpec::ResidualAdd);
                layers.push(LayerSpec::Conv {
                    in_channels: feats,
                    out_channels: self.channels * factor * factor,
                    kernel: KERNEL,
                });
                layers.push(LayerSpec::Shuffle(factor));
                if self.bicubic_skip {
                    layers.push(LayerSpec::AddUpscaledInput(factor));
                }
            }
            Task::Denoise => {
                let r = DENOISE_SHUFFLE;
                let packed = self.channels * r * r;
                layers.push(LayerSpec::Unshuffle(r));
                layers.push(LayerSpec::Conv {
                    in_channels: packed,
                    out_channels: self.width,
                    kernel: KERNEL,
                });
                layers.push(LayerSpec::Activation {
                    spec: act,
                    channels: self.width,
                });
                trunk(&mut layers);
                layers.push(LayerSpec::Conv {
                    in_channels: feats,
                    out_channels: packed,
                    kernel: KERNEL,
                });
                layers.push(LayerSpec::Shuffle(r));
                if self.denoise_target == DenoiseTarget::NoiseResidual {
                    layers.push(LayerSpec::SubtractFromInput);
                }
            }
        }
        Ok(layers)
    }

    /// Output shape for `input`, validating every link of the chain.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        if input.c != self.channels {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                got: input.c,
            });
        }
        let mut stack = Vec::new();
        let mut s = input;
        for layer in self.layers()? {
            s = layer.output_shape(s, input, &mut stack)?;
        }
        Ok(s)
    }

    /// Side length, in input pixels, of the window one output pixel sees.
    pub fn receptive_field(&self) -> Result<usize> {
        let mut field = 1;
        let mut jump = 1;
        for layer in self.layers()? {
            match layer {
                LayerSpec::Conv { kernel, .. } => field += (kernel - 1) * jump,
                LayerSpec::Unshuffle(r) => {
                    field += (r - 1) * jump;
                    jump *= r;
                }
                LayerSpec::Shuffle(r) => jump = (jump / r).max(1),
                _ => {}
            }
        }
        Ok(field)
    }

    /// Number of convolution layers in [`NetworkSpec::layers`].
    pub fn conv_count(&self) -> Result<usize> {
        Ok(self
            .layers()?
            .iter()
            .filter(|l| matches!(l, LayerSpec::Conv { .. }))
            .count())
    }
}

/// Receptive field of FDnet with `depth` convolutions, in input pixels.
pub fn fdnet_receptive_field(depth: usize, activation: ActivationSpec) -> Result<usize> {
    NetworkSpec::fdnet(depth, DEFAULT_WIDTH, activation).receptive_field()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    BatchNorm {
        channels: usize,
    },
    Activation {
        spec: ActivationSpec,
        channels: usize,
    },
    Shuffle(usize),
    Unshuffle(usize),
    /// Remembers the current features for a later [`LayerSpec::ResidualAdd`].
    ResidualMark,
    ResidualAdd,
    /// `network_input - x`.
    SubtractFromInput,
    /// `x + bicubic_upscale(network_input, r)`.
    AddUpscaledInput(usize),
}

impl LayerSpec {
    pub fn output_shape(&self, s: Shape, input: Shape, stack: &mut Vec<Shape>) -> Result<Shape> {
        let expect_channels = |c: usize| {
            if s.c == c {
                Ok(())
            } else {
                Err(Error::ChannelMismatch {
                    expected: c,
                    got: s.c,
                })
            }
        };
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                ..
            } => {
                expect_channels(in_channels)?;
                Ok(Shape::new(s.n, out_channels, s.h, s.w))
            }
            LayerSpec::BatchNorm { channels } => {
                expect_channels(channels)?;
                Ok(s)
            }
            LayerSpec::Activation { spec, channels } => {
                expect_channels(channels)?;
                Ok(Shape::new(s.n, spec.output_channels(channels)?, s.h, s.w))
            }
            LayerSpec::Shuffle(r) => shuffled_shape(s, r),
            LayerSpec::Unshuffle(r) => unshuffled_shape(s, r),
            LayerSpec::ResidualMark => {
                stack.push(s);
                Ok(s)
            }
            LayerSpec::ResidualAdd => {
                let marked = stack
                    .pop()
                    .ok_or_else(|| Error::shape("residual add without a mark"))?;
                if marked != s {
                    return Err(Error::shape(format!("residual add of {marked} and {s}")));
                }
                Ok(s)
            }
            LayerSpec::SubtractFromInput => {
                if s != input {
                    return Err(Error::shape(format!("input residual of {input} and {s}")));
                }
                Ok(s)
            }
            LayerSpec::AddUpscaledInput(r) => {
                let up = Shape::new(input.n, input.c, input.h * r, input.w * r);
                if up != s {
                    return Err(Error::shape(format!("bicubic skip of {up} and {s}")));
                }
                Ok(s)
            }
        }
    }
}
