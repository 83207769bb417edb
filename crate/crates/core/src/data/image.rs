//! 8-bit images, real-valued planes and PNG I/O.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Interleaved 8-bit image with 1 (gray) or 3 (RGB) channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedImage(format!("{channels} channels")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::shape(format!(
                "{} bytes for a {width}x{height}x{channels} image",
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Channel `c` as real values `byte / 255`.
    pub fn plane(&self, c: usize) -> Result<Plane> {
        if c >= self.channels {
            return Err(Error::ChannelMismatch {
                expected: self.channels,
                got: c + 1,
            });
        }
        let data = self
            .pixels
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&b| b as f64 / 255.0)
            .collect();
        Plane::new(self.width, self.height, data)
    }

    /// Gray image from a real plane: clamps to `[0, 1]`, scales by 255 and
    /// rounds half to even.
    pub fn from_plane(p: &Plane) -> Self {
        Image {
            width: p.width,
            height: p.height,
            channels: 1,
            pixels: p.data.iter().map(|&v| to_byte(v)).collect(),
        }
    }

    pub fn from_planes(planes: &[Plane; 3]) -> Result<Self> {
        let (w, h) = (planes[0].width, planes[0].height);
        if planes.iter().any(|p| p.width != w || p.height != h) {
            return Err(Error::shape("RGB planes differ in size"));
        }
        let mut pixels = Vec::with_capacity(w * h * 3);
        for i in 0..w * h {
            for p in planes {
                pixels.push(to_byte(p.data[i]));
            }
        }
        Image::new(w, h, 3, pixels)
    }
}

fn to_byte(v: f64) -> u8 {
    round_byte(v.clamp(0.0, 1.0) * 255.0)
}

fn round_byte(scaled: f64) -> u8 {
    scaled.round_ties_even() as u8
}

/// Single-channel real-valued image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{} values for a {width}x{height} plane",
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Plane {
            width,
            height,
            data: vec![v; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sub-rectangle starting at `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, width: usize, height: usize) -> Result<Plane> {
        if x + width > self.width || y + height > self.height {
            return Err(Error::shape(format!(
                "crop {width}x{height} at ({x}, {y}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for row in y..y + height {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Plane::new(width, height, data)
    }

    /// Largest top-left crop whose sides are multiples of `m`.
    pub fn crop_to_multiple(&self, m: usize) -> Result<Plane> {
        let (w, h) = (self.width / m * m, self.height / m * m);
        if w == 0 || h == 0 {
            return Err(Error::shape(format!(
                "{}x{} plane is smaller than {m}",
                self.width, self.height
            )));
        }
        self.crop(0, 0, w, h)
    }

    pub fn clipped(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// `(1, 1, H, W)` tensor.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::from_vec(
            Shape::new(1, 1, self.height, self.width),
            self.data.iter().map(|&v| T::from_f64(v)).collect(),
        )
        .expect("plane dimensions match its data")
    }

    /// Plane from a tensor with a single image and channel.
    pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<Plane> {
        let s = t.shape();
        if s.n != 1 || s.c != 1 {
            return Err(Error::shape(format!(
                "expected a single-plane tensor, got {s}"
            )));
        }
        Plane::new(s.w, s.h, t.data().iter().map(|v| v.as_f64()).collect())
    }
}

/// An image with the file stem it was loaded from.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedImage {
    pub name: String,
    pub image: Image,
}

pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let malformed = |reason: String| Error::MalformedImage {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path)?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| malformed(e.to_string()))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedImage(format!(
            "{}: bit depth {:?}, only 8-bit is supported",
            path.display(),
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::UnsupportedImage(format!(
                "{}: color type {other:?}, only gray and RGB are supported",
                path.display()
            )))
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| malformed("image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| malformed(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    Image::new(width, height, channels, buf)
}

pub fn save_png(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    encoder.set_color(if img.channels == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer
        .write_image_data(&img.pixels)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer
        .finish()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

/// Every `.png` in `dir`, sorted by file name.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<NamedImage>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(NamedImage {
                name,
                image: load_png(&p)?,
            })
        })
        .collect()
}

/// Writes each image as `<dir>/<name>.png`.
pub fn save_dir(images: &[NamedImage], dir: impl AsRef<Path>) -> Result<()> {
    fs::create_dir_all(dir.as_ref())?;
    for img in images {
        save_png(&img.image, dir.as_ref().join(format!("{}.png", img.name)))?;
    }
    Ok(())
}
