use std::path::{Path, PathBuf};

use clap::Args;
use mtlu_core::data::{
    add_awgn, bicubic_resize, image_seed, load_dir, load_png, rgb_to_ycbcr, save_png, ycbcr_to_rgb,
    Image, Plane,
};
use mtlu_core::networks::{Network, Task};
use mtlu_core::Rng;

use crate::error::{with_path, CliError, CliResult};

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// PNG file or directory of PNG files.
    #[arg(long)]
    pub input: PathBuf,
    /// Output PNG file, or directory when the input is a directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Denoise: corrupt the input with this noise sigma first.
    #[arg(long)]
    pub add_noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn crop(p: &Plane, w: usize, h: usize) -> CliResult<Plane> {
    Ok(p.crop(0, 0, w, h)?)
}

/// Runs the network on the luminance; chroma is bicubic-upscaled for SR and
/// passed through for denoising.
pub fn restore(net: &Network<f32>, img: &Image, noise: Option<(f64, u64)>) -> CliResult<Image> {
    let m = net.spec().input_multiple();
    let (w, h) = (img.width() / m * m, img.height() / m * m);
    if w == 0 || h == 0 {
        return Err(CliError::Check(format!(
            "image {}x{} is smaller than the network input multiple {m}",
            img.width(),
            img.height()
        )));
    }
    let planes: Vec<Plane> = match img.channels() {
        1 => vec![crop(&img.plane(0)?, w, h)?],
        _ => rgb_to_ycbcr(img)?
            .iter()
            .map(|p| crop(p, w, h))
            .collect::<CliResult<_>>()?,
    };
    let mut y = planes[0].clone();
    if let (Task::Denoise, Some((sigma, seed))) = (net.spec().task, noise) {
        y = add_awgn(&y, sigma, &mut Rng::new(seed))?;
    }
    let out = net.forward(&y.to_tensor::<f32>())?;
    if out.data().iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numeric("network output is not finite".into()));
    }
    let y = Plane::from_tensor(&out)?;
    if planes.len() == 1 {
        return Ok(Image::from_plane(&y));
    }
    let chroma = |p: &Plane| -> CliResult<Plane> {
        Ok(match net.spec().task {
            Task::SuperResolution { .. } => bicubic_resize(p, y.width, y.height)?,
            Task::Denoise => p.clone(),
        })
    };
    let (cb, cr) = (chroma(&planes[1])?, chroma(&planes[2])?);
    Ok(ycbcr_to_rgb(&[y, cb, cr])?)
}

fn one(net: &Network<f32>, args: &InferArgs, name: &str, img: &Image, out: &Path) -> CliResult<()> {
    let noise = args.add_noise.map(|s| (s, image_seed(args.seed, name)));
    let restored = restore(net, img, noise)?;
    with_path(save_png(&restored, out), out)?;
    println!("{} -> {}", name, out.display());
    Ok(())
}

pub fn run(args: &InferArgs) -> CliResult<()> {
    if args.add_noise.is_some_and(|s| !(s >= 0.0)) {
        return Err(CliError::usage("--add-noise must be non-negative"));
    }
    let net = super::eval::load_net(&args.checkpoint)?;
    if args.input.is_dir() {
        let images = with_path(load_dir(&args.input), &args.input)?;
        if images.is_empty() {
            return Err(CliError::usage(format!(
                "no PNG images in {}",
                args.input.display()
            )));
        }
        std::fs::create_dir_all(&args.output).map_err(|e| {
            CliError::usage(format!("cannot create {}: {e}", args.output.display()))
        })?;
        for n in &images {
            one(
                &net,
                args,
                &n.name,
                &n.image,
                &args.output.join(format!("{}.png", n.name)),
            )?;
        }
        Ok(())
    } else {
        let img = with_path(load_png(&args.input), &args.input)?;
        let name = args
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        one(&net, args, &name, &img, &args.output)
    }
}
