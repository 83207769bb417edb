//! PSNR in 64-bit.

use super::image::Plane;
use crate::error::{Error, Result};

/// `10 log10(peak^2 / MSE)`. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "psnr of {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("psnr of empty inputs"));
    }
    let sse: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let mse = sse / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// PSNR of two planes after discarding a `shave`-pixel border.
pub fn psnr_shaved(a: &Plane, b: &Plane, shave: usize) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::shape(format!(
            "psnr of {}x{} and {}x{} planes",
            a.width, a.height, b.width, b.height
        )));
    }
    if 2 * shave >= a.width || 2 * shave >= a.height {
        return Err(Error::invalid(format!(
            "shave {shave} leaves nothing of a {}x{} plane",
            a.width, a.height
        )));
    }
    if shave == 0 {
        return psnr(&a.data, &b.data, 1.0);
    }
    let (w, h) = (a.width - 2 * shave, a.height - 2 * shave);
    psnr(
        &a.crop(shave, shave, w, h)?.data,
        &b.crop(shave, shave, w, h)?.data,
        1.0,
    )
}

/// Mean of per-image PSNRs. Any infinite entry makes the mean infinite.
pub fn mean_psnr(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_infinite() {
        let a = vec![0.1, 0.2, 0.3];
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn one_level_offset() {
        let a = vec![0.2; 100];
        let b: Vec<f64> = a.iter().map(|v| v + 1.0 / 255.0).collect();
        let p = psnr(&a, &b, 1.0).unwrap();
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-9);
        assert!((p - 48.13).abs() < 0.01);
    }

    #[test]
    fn shave_ignores_border() {
        let a = Plane::filled(10, 10, 0.5);
        let mut b = a.clone();
        b.data[0] = 0.0;
        b.data[99] = 1.0;
        b.data[5] = 0.9;
        assert_eq!(psnr_shaved(&a, &b, 1).unwrap(), f64::INFINITY);
        assert!(psnr_shaved(&a, &b, 0).unwrap().is_finite());
        assert!(psnr_shaved(&a, &b, 5).is_err());
    }

    #[test]
    fn mean_is_order_independent() {
        let v = [31.2, 29.9, 33.3, 30.01, 28.7];
        let mut r = v;
        r.reverse();
        assert_eq!(mean_psnr(&v).to_bits(), mean_psnr(&r).to_bits());
        assert_eq!(mean_psnr(&[30.0, f64::INFINITY]), f64::INFINITY);
    }
}
