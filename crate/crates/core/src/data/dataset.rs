//! Training pairs and random patch sampling.

use super::color::luminance;
use super::image::{NamedImage, Plane};
use super::noise::add_awgn;
use super::resize::bicubic_resize;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Rng;
use crate::tensor::{Shape, Tensor};

/// How network inputs are synthesized from clean images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Degradation {
    /// Bicubic downscaling by an integer factor.
    Bicubic { factor: usize },
    /// Additive Gaussian noise, sigma on the 0-255 scale.
    Awgn { sigma: f64 },
}

impl Degradation {
    /// Side multiple clean images are cropped to.
    pub fn multiple(&self) -> usize {
        match self {
            Degradation::Bicubic { factor } => *factor,
            Degradation::Awgn { .. } => crate::networks::DENOISE_SHUFFLE,
        }
    }

    pub fn scale(&self) -> usize {
        match self {
            Degradation::Bicubic { factor } => *factor,
            Degradation::Awgn { .. } => 1,
        }
    }
}

/// Low-resolution version of `hr`, whose sides must be multiples of `factor`.
pub fn downscale(hr: &Plane, factor: usize) -> Result<Plane> {
    if factor == 0 || !hr.width.is_multiple_of(factor) || !hr.height.is_multiple_of(factor) {
        return Err(Error::Divisibility {
            what: "high-resolution side",
            value: if factor > 0 && !hr.width.is_multiple_of(factor) {
                hr.width
            } else {
                hr.height
            },
            divisor: factor,
        });
    }
    bicubic_resize(hr, hr.width / factor, hr.height / factor)
}

#[derive(Clone, Debug, PartialEq)]
struct Pair {
    /// Low-resolution input for SR; unused for denoising.
    input: Option<Plane>,
    target: Plane,
}

/// Luminance images prepared for one degradation.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    degradation: Degradation,
    pairs: Vec<Pair>,
}

/// A batch of aligned network inputs and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchBatch<T> {
    pub input: Tensor<T>,
    pub target: Tensor<T>,
}

impl Dataset {
    pub fn new(images: &[NamedImage], degradation: Degradation) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::invalid("dataset has no images"));
        }
        let pairs = images
            .iter()
            .map(|img| {
                let target = luminance(&img.image)?.crop_to_multiple(degradation.multiple())?;
                let input = match degradation {
                    Degradation::Bicubic { factor } => Some(downscale(&target, factor)?),
                    Degradation::Awgn { .. } => None,
                };
                Ok(Pair { input, target })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { degradation, pairs })
    }

    pub fn degradation(&self) -> Degradation {
        self.degradation
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Draws `(image, x, y)` in input coordinates for `n` patches.
    pub fn patch_coords(
        &self,
        rng: &mut Rng,
        n: usize,
        patch: usize,
    ) -> Result<Vec<(usize, usize, usize)>> {
        if patch == 0 {
            return Err(Error::invalid("patch size must be positive"));
        }
        if let Degradation::Awgn { .. } = self.degradation {
            let m = self.degradation.multiple();
            if !patch.is_multiple_of(m) {
                return Err(Error::Divisibility {
                    what: "denoising patch size",
                    value: patch,
                    divisor: m,
                });
            }
        }
        let r = self.degradation.scale();
        for p in &self.pairs {
            let (w, h) = (p.target.width / r, p.target.height / r);
            if w < patch || h < patch {
                return Err(Error::shape(format!(
                    "{w}x{h} input is smaller than patch {patch}"
                )));
            }
        }
        Ok((0..n)
            .map(|_| {
                let i = rng.below(self.pairs.len());
                let t = &self.pairs[i].target;
                let (w, h) = (t.width / r, t.height / r);
                (i, rng.below(w - patch + 1), rng.below(h - patch + 1))
            })
            .collect())
    }

    /// `n` random patches. SR inputs are `patch` on a side with targets
    /// `factor * patch`; denoising pairs get fresh noise from `rng`.
    pub fn sample_patches<T: Real>(
        &self,
        rng: &mut Rng,
        n: usize,
        patch: usize,
    ) -> Result<PatchBatch<T>> {
        let coords = self.patch_coords(rng, n, patch)?;
        let r = self.degradation.scale();
        let hp = patch * r;
        let mut input = Vec::with_capacity(n * patch * patch);
        let mut target = Vec::with_capacity(n * hp * hp);
        for (i, x, y) in coords {
            let pair = &self.pairs[i];
            let clean = pair.target.crop(x * r, y * r, hp, hp)?;
            let degraded = match (self.degradation, &pair.input) {
                (Degradation::Bicubic { .. }, Some(lr)) => lr.crop(x, y, patch, patch)?,
                (Degradation::Awgn { sigma }, _) => add_awgn(&clean, sigma, rng)?,
                _ => {
                    return Err(Error::Internal(
                        "SR pair without a low-resolution input".into(),
                    ))
                }
            };
            input.extend(degraded.data.iter().map(|&v| T::from_f64(v)));
            target.extend(clean.data.iter().map(|&v| T::from_f64(v)));
        }
        Ok(PatchBatch {
            input: Tensor::from_vec(Shape::new(n, 1, patch, patch), input)?,
            target: Tensor::from_vec(Shape::new(n, 1, hp, hp), target)?,
        })
    }
}
