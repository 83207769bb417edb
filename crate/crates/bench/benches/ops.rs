#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mtlu_bench::input;
use mtlu_core::ops::{
    batchnorm_train, conv2d, conv2d_backward, pixel_shuffle, pixel_unshuffle, ConvParams,
};
use mtlu_core::{Rng, Shape, Tensor};

fn conv(c: &mut Criterion) {
    let x = input(Shape::new(16, 64, 24, 24), 1);
    let p = ConvParams::<f32>::kaiming(64, 64, 3, &mut Rng::new(2)).unwrap();
    let dy = input(x.shape(), 3).into_data();
    let mut g = c.benchmark_group("conv3x3_64");
    g.bench_function("forward", |b| {
        b.iter(|| conv2d(black_box(&x), &p.weight, &p.bias).unwrap())
    });
    g.bench_function("backward", |b| {
        b.iter(|| conv2d_backward(black_box(&x), &p.weight, &dy, true, true).unwrap())
    });
    g.finish();
}

fn batchnorm(c: &mut Criterion) {
    let x = input(Shape::new(16, 64, 24, 24), 1);
    let gamma = Tensor::<f32>::from_vec([1, 64, 1, 1], vec![1.0; 64]).unwrap();
    let beta = Tensor::<f32>::zeros([1, 64, 1, 1]).unwrap();
    c.bench_function("batchnorm_train_64", |b| {
        b.iter(|| batchnorm_train(black_box(&x), &gamma, &beta, 1e-5).unwrap())
    });
}

fn shuffle(c: &mut Criterion) {
    let lr = input(Shape::new(16, 16, 24, 24), 1);
    let hr = input(Shape::new(16, 1, 96, 96), 1);
    let mut g = c.benchmark_group("shuffle_x4");
    g.bench_function("shuffle", |b| {
        b.iter(|| pixel_shuffle(black_box(&lr), 4).unwrap())
    });
    g.bench_function("unshuffle", |b| {
        b.iter(|| pixel_unshuffle(black_box(&hr), 4).unwrap())
    });
    g.finish();
}

criterion_group!(benches, conv, batchnorm, shuffle);
criterion_main!(benches);
