//! Additive white Gaussian noise.

use super::image::Plane;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// `x + n` with `n ~ N(0, (sigma / 255)^2)`, left unclipped.
pub fn add_awgn(p: &Plane, sigma: f64, rng: &mut Rng) -> Result<Plane> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    let s = sigma / 255.0;
    let data = if sigma == 0.0 {
        p.data.clone()
    } else {
        p.data.iter().map(|&v| v + s * rng.normal()).collect()
    };
    Plane::new(p.width, p.height, data)
}

/// Seed for the noise of one named image, so every image gets the same
/// noise regardless of evaluation order.
pub fn image_seed(seed: u64, name: &str) -> u64 {
    seed ^ ((crc32fast::hash(name.as_bytes()) as u64) << 17)
}
