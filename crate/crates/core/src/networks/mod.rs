//! FSRnet and FDnet: specs, instantiated networks and checkpoints.

pub mod checkpoint;
pub mod network;
pub mod spec;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use network::{build_fdnet, build_fsrnet, Layer, Network, ParamInfo, ParamKind, Recorded};
pub use spec::{
    fdnet_receptive_field, DenoiseTarget, LayerSpec, NetworkSpec, Task, DEFAULT_WIDTH,
    DENOISE_SHUFFLE, KERNEL,
};
