//! Full-range BT.601 luma and chroma.

use super::image::{Image, Plane};
use crate::error::{Error, Result};

pub const KR: f64 = 0.299;
pub const KG: f64 = 0.587;
pub const KB: f64 = 0.114;

fn luma(r: f64, g: f64, b: f64) -> f64 {
    // Same weights rearranged around G so that gray maps to itself exactly.
    g + KR * (r - g) + KB * (b - g)
}

fn require_rgb(img: &Image) -> Result<()> {
    if img.channels() != 3 {
        return Err(Error::ChannelMismatch {
            expected: 3,
            got: img.channels(),
        });
    }
    Ok(())
}

/// `Y = 0.299 R + 0.587 G + 0.114 B` on the `[0, 1]` view.
pub fn rgb_to_y(img: &Image) -> Result<Plane> {
    require_rgb(img)?;
    let data = img
        .pixels()
        .chunks_exact(3)
        .map(|p| {
            luma(
                p[0] as f64 / 255.0,
                p[1] as f64 / 255.0,
                p[2] as f64 / 255.0,
            )
        })
        .collect();
    Plane::new(img.width(), img.height(), data)
}

/// Luminance of a gray or RGB image.
pub fn luminance(img: &Image) -> Result<Plane> {
    match img.channels() {
        1 => img.plane(0),
        _ => rgb_to_y(img),
    }
}

/// `[Y, Cb, Cr]` with chroma centered on 0.5.
pub fn rgb_to_ycbcr(img: &Image) -> Result<[Plane; 3]> {
    require_rgb(img)?;
    let n = img.width() * img.height();
    let (mut y, mut cb, mut cr) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for p in img.pixels().chunks_exact(3) {
        let (r, g, b) = (
            p[0] as f64 / 255.0,
            p[1] as f64 / 255.0,
            p[2] as f64 / 255.0,
        );
        let l = luma(r, g, b);
        y.push(l);
        cb.push(0.5 + (b - l) / (2.0 * (1.0 - KB)));
        cr.push(0.5 + (r - l) / (2.0 * (1.0 - KR)));
    }
    let (w, h) = (img.width(), img.height());
    Ok([
        Plane::new(w, h, y)?,
        Plane::new(w, h, cb)?,
        Plane::new(w, h, cr)?,
    ])
}

/// Inverse of [`rgb_to_ycbcr`]; the result is clamped and rounded to bytes.
pub fn ycbcr_to_rgb(planes: &[Plane; 3]) -> Result<Image> {
    let [y, cb, cr] = planes;
    if cb.data.len() != y.data.len() || cr.data.len() != y.data.len() {
        return Err(Error::shape("Y, Cb and Cr planes differ in size"));
    }
    let n = y.data.len();
    let (mut r, mut g, mut b) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let l = y.data[i];
        let rv = l + 2.0 * (1.0 - KR) * (cr.data[i] - 0.5);
        let bv = l + 2.0 * (1.0 - KB) * (cb.data[i] - 0.5);
        r.push(rv);
        b.push(bv);
        g.push((l - KR * rv - KB * bv) / KG);
    }
    Image::from_planes(&[
        Plane::new(y.width, y.height, r)?,
        Plane::new(y.width, y.height, g)?,
        Plane::new(y.width, y.height, b)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(px: &[[u8; 3]]) -> Image {
        Image::new(px.len(), 1, 3, px.iter().flatten().copied().collect()).unwrap()
    }

    #[test]
    fn white_red_and_gray() {
        let y = rgb_to_y(&rgb(&[
            [255, 255, 255],
            [255, 0, 0],
            [0, 255, 0],
            [0, 0, 255],
        ]))
        .unwrap();
        assert_eq!(y.data[0], 1.0);
        assert_eq!(y.data[1], 0.299);
        assert!((y.data[2] - 0.587).abs() < 1e-15);
        assert_eq!(y.data[3], 0.114);
        for v in 0..=255u8 {
            let y = rgb_to_y(&rgb(&[[v, v, v]])).unwrap();
            assert_eq!(y.data[0], v as f64 / 255.0);
        }
    }

    #[test]
    fn gray_input_rejected() {
        let img = Image::new(1, 1, 1, vec![3]).unwrap();
        assert!(matches!(rgb_to_y(&img), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn ycbcr_round_trip() {
        let px: Vec<[u8; 3]> = (0..200u32)
            .map(|i| {
                [
                    (i * 7 % 256) as u8,
                    (i * 53 % 256) as u8,
                    (i * 101 % 256) as u8,
                ]
            })
            .collect();
        let img = rgb(&px);
        assert_eq!(ycbcr_to_rgb(&rgb_to_ycbcr(&img).unwrap()).unwrap(), img);
    }
}
