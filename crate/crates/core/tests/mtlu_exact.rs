mod common;

use common::{bits, mtlu_if_chain};
use mtlu_core::activations::{
    mtlu_backward, mtlu_forward, prelu_backward, prelu_forward, ActivationSpec, BinGeometry,
    GradNorm, MtluParams,
};
use mtlu_core::networks::{Layer, Network, NetworkSpec};
use mtlu_core::{Rng, Tensor};
use proptest::prelude::*;

fn random_params(groups: usize, geometry: BinGeometry, rng: &mut Rng) -> MtluParams<f64> {
    let k = geometry.num_bins();
    let mut p = MtluParams::identity(groups, geometry).unwrap();
    for v in p.slopes.data_mut() {
        *v = rng.uniform(-2.0, 2.0);
    }
    for v in p.offsets.data_mut() {
        *v = rng.uniform(-1.0, 1.0);
    }
    assert_eq!(p.slopes.len(), groups * k);
    p
}

fn check_against_chain(bins: usize, width: f64, shared: bool, seed: u64) {
    let geometry = BinGeometry::centered(bins, width).unwrap();
    let mut rng = Rng::new(seed);
    let channels = 4;
    let p = random_params(if shared { 1 } else { channels }, geometry, &mut rng);
    let span = bins as f64 * width;
    let x =
        Tensor::rand_uniform([2, channels, 25, 50], &mut rng, -0.75 * span, 0.75 * span).unwrap();
    let y = mtlu_forward(&x, &p).unwrap();
    let plane = 25 * 50;
    let left = geometry.left_edge();
    for (i, (&xv, &yv)) in x.data().iter().zip(y.data()).enumerate() {
        let g = if shared { 0 } else { (i / plane) % channels };
        let a = &p.slopes.data()[g * bins..(g + 1) * bins];
        let b = &p.offsets.data()[g * bins..(g + 1) * bins];
        let want = mtlu_if_chain(xv, left, width, a, b);
        assert_eq!(yv.to_bits(), want.to_bits(), "x={xv} bins={bins}");
    }
}

#[test]
fn forward_equals_if_chain() {
    for (i, bins) in [20, 40, 80].into_iter().enumerate() {
        check_against_chain(bins, 0.05, false, i as u64);
        check_against_chain(bins, 0.05, true, 10 + i as u64);
    }
}

#[test]
fn non_integral_origin_equals_if_chain() {
    check_against_chain(7, 0.3, false, 5);
    check_against_chain(33, 0.0123, false, 6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bin_index_is_the_first_anchor_above(
        bins in 1usize..64,
        width in 0.01f64..1.0,
        left in -5.0f64..5.0,
        x in -20.0f64..20.0,
    ) {
        let g = BinGeometry::new(bins, width, left).unwrap();
        let k = g.bin_index(x).unwrap();
        prop_assert!(k < bins);
        // Away from an anchor by more than rounding, the owning bin is unambiguous.
        let t = (x - left) / width;
        prop_assume!((t - t.round()).abs() > 1e-6);
        let want = (1..bins).take_while(|&j| x >= left + j as f64 * width).count();
        prop_assert_eq!(k, want);
    }
}

#[test]
fn anchors_belong_to_the_right_bin() {
    let g = BinGeometry::centered(40, 0.05).unwrap();
    for k in 0..40 {
        let c = g.anchor(k);
        assert_eq!(g.bin_index(c).unwrap(), k);
        if k > 0 {
            assert_eq!(g.bin_index(c.next_down()).unwrap(), k - 1);
            assert!((c - (-1.0 + k as f64 * 0.05)).abs() <= 4.0 * f64::EPSILON);
        }
    }
    assert_eq!(g.bin_index(0.0).unwrap(), 20);
    assert_eq!(g.bin_index(-1e9).unwrap(), 0);
    assert_eq!(g.bin_index(1e9).unwrap(), 39);
}

fn conv_weights<T: mtlu_core::Real>(net: &Network<T>) -> Vec<u64> {
    net.layers()
        .iter()
        .flat_map(|l| match l {
            Layer::Conv(p) => bits(p.weight.data())
                .into_iter()
                .chain(bits(p.bias.data()))
                .collect(),
            _ => Vec::new(),
        })
        .collect()
}

#[test]
fn relu_initialized_network_matches_relu_network_bitwise() {
    for (spec_of, input) in [
        (
            (|a| NetworkSpec::fsrnet(3, 5, 8, a)) as fn(ActivationSpec) -> NetworkSpec,
            [2, 1, 9, 7],
        ),
        (|a| NetworkSpec::fdnet(5, 8, a), [1, 1, 16, 12]),
    ] {
        for bins in [20, 40, 80] {
            let mtlu: Network<f32> =
                Network::build(spec_of(ActivationSpec::mtlu(bins, 0.05)), &mut Rng::new(9))
                    .unwrap();
            let relu: Network<f32> =
                Network::build(spec_of(ActivationSpec::Relu), &mut Rng::new(9)).unwrap();
            assert_eq!(conv_weights(&mtlu), conv_weights(&relu));
            let x = Tensor::<f32>::randn(input, &mut Rng::new(4), 0.0, 2.0).unwrap();
            let ya = mtlu.forward(&x).unwrap();
            let yb = relu.forward(&x).unwrap();
            assert_eq!(bits(ya.data()), bits(yb.data()), "bins={bins}");
        }
    }
}

#[test]
fn prelu_is_a_two_bin_mtlu() {
    let mut rng = Rng::new(17);
    let channels = 3;
    let w = 0.05;
    let alpha = Tensor::from_vec([1, channels, 1, 1], vec![0.25, -0.6, 1.7]).unwrap();
    let mut p = MtluParams::<f64>::identity(channels, BinGeometry::new(2, w, -w).unwrap()).unwrap();
    for c in 0..channels {
        p.slopes.data_mut()[2 * c] = alpha.data()[c];
    }
    p.grad_norm = GradNorm::Exact;
    let x = Tensor::randn([4, channels, 11, 13], &mut rng, 0.0, 1.0).unwrap();
    let dy = Tensor::<f64>::randn(x.shape(), &mut rng, 0.0, 1.0).unwrap();

    let ya = prelu_forward(&x, &alpha).unwrap();
    let yb = mtlu_forward(&x, &p).unwrap();
    assert_eq!(bits(ya.data()), bits(yb.data()));

    let (dxa, dalpha) = prelu_backward(&x, dy.data(), &alpha).unwrap();
    let (dxb, da, db) = mtlu_backward(&x, dy.data(), &p).unwrap();
    assert_eq!(bits(&dxa), bits(&dxb));
    for c in 0..channels {
        // The same sum accumulated in a different order.
        assert!((dalpha[c] - da[2 * c]).abs() <= 1e-12 * dalpha[c].abs().max(1.0));
    }
    assert!(db.iter().any(|&v| v != 0.0));
}
