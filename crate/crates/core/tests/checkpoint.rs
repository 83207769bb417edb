mod common;

use common::{bits, data_dir, perturb, read_tensor, write_tensor};
use mtlu_core::activations::ActivationSpec;
use mtlu_core::networks::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Network, NetworkSpec,
};
use mtlu_core::{CheckpointError, Error, Rng, Tensor};

const GOLDEN_NET: &str = "golden_3layer.mtlu";
const GOLDEN_INPUT: &str = "golden_input.bin";
const GOLDEN_OUTPUT: &str = "golden_output.bin";

fn perturbed(spec: NetworkSpec, seed: u64) -> Network<f32> {
    let mut net = Network::build(spec, &mut Rng::new(seed)).unwrap();
    perturb(&mut net, &mut Rng::new(seed + 1), 0.05);
    net
}

fn specs() -> Vec<NetworkSpec> {
    let mut skip = NetworkSpec::fsrnet(3, 4, 6, ActivationSpec::Prelu);
    skip.bicubic_skip = true;
    vec![
        NetworkSpec::fsrnet(2, 5, 8, ActivationSpec::mtlu(40, 0.05)),
        skip,
        NetworkSpec::fdnet(4, 8, ActivationSpec::Maxout),
        NetworkSpec::fdnet(3, 4, ActivationSpec::Apl { kernels: 3 }),
        NetworkSpec::fsrnet(
            4,
            3,
            4,
            ActivationSpec::Plf {
                segments: 10,
                interval: 0.2,
            },
        ),
    ]
}

#[test]
fn round_trip_is_bitwise() {
    for (i, spec) in specs().into_iter().enumerate() {
        let net = perturbed(spec, i as u64);
        let bytes = write_checkpoint(&net).unwrap();
        let back: Network<f32> = read_checkpoint(&bytes).unwrap();
        assert_eq!(back, net);
        assert_eq!(write_checkpoint(&back).unwrap(), bytes);
        let wide: Network<f64> = read_checkpoint(&bytes).unwrap();
        let a: Vec<u64> = net.params().iter().flat_map(|t| bits(t.data())).collect();
        let b: Vec<u64> = wide.params().iter().flat_map(|t| bits(t.data())).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn save_and_load_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.mtlu");
    let net = perturbed(specs()[0], 11);
    save_checkpoint(&net, &path).unwrap();
    let back: Network<f32> = load_checkpoint(&path).unwrap();
    let x = Tensor::<f32>::rand_uniform([1, 1, 9, 9], &mut Rng::new(1), 0.0, 1.0).unwrap();
    assert_eq!(
        bits(net.forward(&x).unwrap().data()),
        bits(back.forward(&x).unwrap().data())
    );
    assert!(matches!(
        load_checkpoint::<f32>(dir.path().join("missing.mtlu")).unwrap_err(),
        Error::Io(_)
    ));
}

fn checkpoint_error(bytes: &[u8]) -> CheckpointError {
    match read_checkpoint::<f32>(bytes).unwrap_err() {
        Error::Checkpoint(e) => e,
        other => panic!("expected a checkpoint error, got {other}"),
    }
}

#[test]
fn corrupted_files_are_rejected() {
    let bytes = write_checkpoint(&perturbed(specs()[0], 3)).unwrap();
    for at in [12, bytes.len() / 2, bytes.len() - 5] {
        let mut bad = bytes.clone();
        bad[at] ^= 0x10;
        assert!(
            matches!(checkpoint_error(&bad), CheckpointError::Checksum { .. }),
            "byte {at}"
        );
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(checkpoint_error(&bad), CheckpointError::BadMagic));
    for len in [9, 13, bytes.len() - 1] {
        assert!(
            read_checkpoint::<f32>(&bytes[..len]).is_err(),
            "length {len}"
        );
    }
    assert!(matches!(checkpoint_error(&[]), CheckpointError::BadMagic));
}

#[test]
fn other_versions_are_rejected() {
    let mut bytes = write_checkpoint(&perturbed(specs()[1], 4)).unwrap();
    bytes[8..10].copy_from_slice(&2u16.to_le_bytes());
    assert!(matches!(
        checkpoint_error(&bytes),
        CheckpointError::VersionMismatch {
            found: 2,
            expected: 1
        }
    ));
}

fn golden_net() -> Network<f32> {
    perturbed(
        NetworkSpec::fsrnet(2, 3, 8, ActivationSpec::mtlu(40, 0.05)),
        2024,
    )
}

#[test]
fn golden_checkpoint_reproduces_golden_output() {
    let dir = data_dir();
    let net: Network<f32> = load_checkpoint(dir.join(GOLDEN_NET)).unwrap();
    assert_eq!(net.spec().depth, 3);
    let x = read_tensor(&std::fs::read(dir.join(GOLDEN_INPUT)).unwrap());
    let want = read_tensor(&std::fs::read(dir.join(GOLDEN_OUTPUT)).unwrap());
    let got = net.forward(&x).unwrap();
    assert_eq!(got.shape(), want.shape());
    for (g, w) in got.data().iter().zip(want.data()) {
        assert!((g - w).abs() <= 1e-6, "{g} vs {w}");
    }
    let wide = load_checkpoint::<f64>(dir.join(GOLDEN_NET)).unwrap();
    let got = wide.forward(&x.cast::<f64>()).unwrap();
    for (g, w) in got.data().iter().zip(want.data()) {
        assert!((g - *w as f64).abs() <= 1e-5, "{g} vs {w}");
    }
}

/// Rewrites the committed golden files. Run only after a deliberate format
/// or numerics change: `cargo test --test checkpoint -- --ignored`.
#[test]
#[ignore]
fn regenerate_golden_files() {
    let dir = data_dir();
    let net = golden_net();
    let x = Tensor::<f32>::rand_uniform([1, 1, 10, 12], &mut Rng::new(77), 0.0, 1.0).unwrap();
    let y = net.forward(&x).unwrap();
    save_checkpoint(&net, dir.join(GOLDEN_NET)).unwrap();
    std::fs::write(dir.join(GOLDEN_INPUT), write_tensor(&x)).unwrap();
    std::fs::write(dir.join(GOLDEN_OUTPUT), write_tensor(&y)).unwrap();
}
