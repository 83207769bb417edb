//! Shared fixtures for the criterion benchmarks under `benches/`.

use mtlu_core::activations::{Activation, ActivationSpec};
use mtlu_core::{Rng, Shape, Tensor};

/// N(0, 1) input of the given shape.
pub fn input(shape: Shape, seed: u64) -> Tensor<f32> {
    Tensor::randn(shape, &mut Rng::new(seed), 0.0, 1.0).expect("valid shape")
}

/// An activation layer with its parameters nudged away from the ReLU
/// initialization so every bin or hinge does real work.
pub fn perturbed(spec: ActivationSpec, channels: usize, seed: u64) -> Activation<f32> {
    let mut rng = Rng::new(seed);
    let mut act = spec.instantiate::<f32>(channels).expect("valid activation");
    for t in act.params_mut() {
        for v in t.data_mut() {
            *v += 0.1 * rng.normal() as f32;
        }
    }
    act
}
