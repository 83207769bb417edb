//! Differentiable structural operators.
//!
//! Each operator exists as a plain function on tensors (used for inference)
//! and as a [`Tape`](crate::Tape) method that records its backward pass.

pub mod batchnorm;
pub mod conv;
pub mod elementwise;
pub mod shuffle;

pub use batchnorm::{
    batch_stats, batchnorm, batchnorm_eval, batchnorm_train, BatchStats, BnParams, Mode,
};
pub use conv::{conv2d, conv2d_backward, ConvParams};
pub use elementwise::{add, mse, sub};
pub use shuffle::{pixel_shuffle, pixel_unshuffle, shuffled_shape, unshuffled_shape};
