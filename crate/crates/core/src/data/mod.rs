//! Image I/O, degradations, patch sampling and PSNR evaluation.

pub mod color;
pub mod dataset;
pub mod eval;
pub mod image;
pub mod metrics;
pub mod noise;
pub mod resize;
pub mod synthetic;

pub use color::{luminance, rgb_to_y, rgb_to_ycbcr, ycbcr_to_rgb};
pub use dataset::{downscale, Dataset, Degradation, PatchBatch};
pub use eval::{
    check_compatible, eval_benchmark, eval_with, format_db, prepare, EvalPair, EvalReport, EvalRow,
};
pub use image::{load_dir, load_png, save_dir, save_png, Image, NamedImage, Plane};
pub use metrics::{mean_psnr, psnr, psnr_shaved};
pub use noise::{add_awgn, image_seed};
pub use resize::{bicubic_resize, bicubic_scale, upscale_tensor};
pub use synthetic::{synthetic_corpus, SyntheticSpec};
