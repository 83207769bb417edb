//! Procedural texture corpus: gradients overlaid with flat, striped and
//! checkered shapes, rendered with supersampling so edges are anti-aliased.

use super::image::{Image, NamedImage};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    /// 1 for gray, 3 for RGB.
    pub channels: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(count: usize, size: usize, seed: u64) -> Self {
        SyntheticSpec {
            count,
            width: size,
            height: size,
            channels: 3,
            seed,
        }
    }
}

const SUPERSAMPLE: usize = 3;

#[derive(Clone, Copy)]
enum Region {
    Disc {
        cx: f64,
        cy: f64,
        r: f64,
    },
    Rect {
        cx: f64,
        cy: f64,
        hw: f64,
        hh: f64,
        cos: f64,
        sin: f64,
    },
    Triangle([(f64, f64); 3]),
    Ring {
        cx: f64,
        cy: f64,
        r0: f64,
        r1: f64,
    },
}

impl Region {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::Disc { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Region::Rect {
                cx,
                cy,
                hw,
                hh,
                cos,
                sin,
            } => {
                let (dx, dy) = (x - cx, y - cy);
                (dx * cos + dy * sin).abs() <= hw && (-dx * sin + dy * cos).abs() <= hh
            }
            Region::Triangle(p) => {
                let edge = |a: (f64, f64), b: (f64, f64)| {
                    (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
                };
                let (e0, e1, e2) = (edge(p[0], p[1]), edge(p[1], p[2]), edge(p[2], p[0]));
                (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0)
            }
            Region::Ring { cx, cy, r0, r1 } => {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                d2 >= r0 * r0 && d2 <= r1 * r1
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Fill {
    Flat([f64; 3]),
    Stripes {
        a: [f64; 3],
        b: [f64; 3],
        period: f64,
        cos: f64,
        sin: f64,
        phase: f64,
    },
    Checker {
        a: [f64; 3],
        b: [f64; 3],
        cell: f64,
    },
}

impl Fill {
    fn color(&self, x: f64, y: f64) -> [f64; 3] {
        match *self {
            Fill::Flat(c) => c,
            Fill::Stripes {
                a,
                b,
                period,
                cos,
                sin,
                phase,
            } => {
                let t = ((x * cos + y * sin) / period + phase).rem_euclid(1.0);
                if t < 0.5 {
                    a
                } else {
                    b
                }
            }
            Fill::Checker { a, b, cell } => {
                if ((x / cell).floor() + (y / cell).floor()).rem_euclid(2.0) < 1.0 {
                    a
                } else {
                    b
                }
            }
        }
    }
}

fn random_color(rng: &mut Rng, gray: bool) -> [f64; 3] {
    if gray {
        let v = rng.uniform(0.05, 0.95);
        [v, v, v]
    } else {
        [
            rng.uniform(0.05, 0.95),
            rng.uniform(0.05, 0.95),
            rng.uniform(0.05, 0.95),
        ]
    }
}

fn random_fill(rng: &mut Rng, gray: bool, scale: f64) -> Fill {
    let a = random_color(rng, gray);
    match rng.below(4) {
        0 | 1 => Fill::Flat(a),
        2 => {
            let angle = rng.uniform(0.0, std::f64::consts::PI);
            Fill::Stripes {
                a,
                b: random_color(rng, gray),
                period: rng.uniform(0.03, 0.15) * scale,
                cos: angle.cos(),
                sin: angle.sin(),
                phase: rng.uniform(0.0, 1.0),
            }
        }
        _ => Fill::Checker {
            a,
            b: random_color(rng, gray),
            cell: rng.uniform(0.03, 0.12) * scale,
        },
    }
}

fn random_region(rng: &mut Rng, w: f64, h: f64) -> Region {
    let scale = w.min(h);
    let (cx, cy) = (rng.uniform(0.0, w), rng.uniform(0.0, h));
    match rng.below(4) {
        0 => Region::Disc {
            cx,
            cy,
            r: rng.uniform(0.08, 0.35) * scale,
        },
        1 => {
            let angle = rng.uniform(0.0, std::f64::consts::PI);
            Region::Rect {
                cx,
                cy,
                hw: rng.uniform(0.05, 0.35) * scale,
                hh: rng.uniform(0.05, 0.35) * scale,
                cos: angle.cos(),
                sin: angle.sin(),
            }
        }
        2 => {
            let mut p = [(0.0, 0.0); 3];
            for v in &mut p {
                *v = (
                    cx + rng.uniform(-0.4, 0.4) * scale,
                    cy + rng.uniform(-0.4, 0.4) * scale,
                );
            }
            Region::Triangle(p)
        }
        _ => {
            let r0 = rng.uniform(0.05, 0.25) * scale;
            Region::Ring {
                cx,
                cy,
                r0,
                r1: r0 + rng.uniform(0.02, 0.1) * scale,
            }
        }
    }
}

/// Renders one texture image from `rng`.
pub fn render_texture(
    width: usize,
    height: usize,
    channels: usize,
    rng: &mut Rng,
) -> Result<Image> {
    if channels != 1 && channels != 3 {
        return Err(Error::UnsupportedImage(format!("{channels} channels")));
    }
    let gray = channels == 1;
    let (w, h) = (width as f64, height as f64);
    let scale = w.min(h);
    let base = random_color(rng, gray);
    let tilt = random_color(rng, gray).map(|v| (v - 0.5) * 0.6);
    let angle = rng.uniform(0.0, 2.0 * std::f64::consts::PI);
    let (gc, gs) = (angle.cos(), angle.sin());
    let shapes: Vec<(Region, Fill)> = (0..3 + rng.below(6))
        .map(|_| (random_region(rng, w, h), random_fill(rng, gray, scale)))
        .collect();

    let mut pixels = Vec::with_capacity(width * height * channels);
    let ss = SUPERSAMPLE as f64;
    for py in 0..height {
        for px in 0..width {
            let mut acc = [0.0; 3];
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = px as f64 + (sx as f64 + 0.5) / ss;
                    let y = py as f64 + (sy as f64 + 0.5) / ss;
                    let t = ((x - w / 2.0) * gc + (y - h / 2.0) * gs) / scale;
                    let mut c = [0.0; 3];
                    for k in 0..3 {
                        c[k] = base[k] + tilt[k] * t;
                    }
                    for (region, fill) in &shapes {
                        if region.contains(x, y) {
                            c = fill.color(x, y);
                        }
                    }
                    for k in 0..3 {
                        acc[k] += c[k];
                    }
                }
            }
            for v in acc.iter().take(channels) {
                let v = (v / (ss * ss)).clamp(0.0, 1.0);
                pixels.push((v * 255.0).round_ties_even() as u8);
            }
        }
    }
    Image::new(width, height, channels, pixels)
}

/// `spec.count` images named `tex_0000`, `tex_0001`, ...
pub fn synthetic_corpus(spec: &SyntheticSpec) -> Result<Vec<NamedImage>> {
    let root = Rng::new(spec.seed);
    (0..spec.count)
        .map(|i| {
            let mut rng = root.fork(i as u64);
            Ok(NamedImage {
                name: format!("tex_{i:04}"),
                image: render_texture(spec.width, spec.height, spec.channels, &mut rng)?,
            })
        })
        .collect()
}
