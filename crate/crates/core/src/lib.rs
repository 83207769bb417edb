//! Multi-bin trainable linear units (MTLU) and the shuffled-resolution
//! restoration networks built around them.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`], [`rng`] and [`tape`]: the value type, seeded randomness and
//!   reverse-mode differentiation.
//! - [`ops`]: convolution, batch normalization, pixel (un)shuffle, addition
//!   and the MSE loss.
//! - [`activations`]: MTLU plus ReLU, PReLU, MaxOut, APL and PLF.
//! - [`networks`]: FSRnet / FDnet builders, execution and checkpoints.
//! - [`training`]: Adam with per-group weight decay, step schedule and the
//!   training loop.
//! - [`data`]: images, degradations, patch sampling and PSNR evaluation.
//! - [`gradcheck`] and [`timing`]: finite-difference verification and
//!   activation throughput measurement.

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod activations;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod networks;
pub mod ops;
mod par;
pub mod real;
pub mod rng;
pub mod tape;
pub mod tensor;
pub mod timing;
pub mod training;

pub use error::{CheckpointError, Error, Result};
pub use real::Real;
pub use rng::Rng;
pub use tape::{Tape, Var};
pub use tensor::{Shape, Tensor};
