//! Binary checkpoint format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "MTLUCKPT"  u16 version
//! u32 metadata length | metadata | f32 arrays ...   <- payload
//! u32 CRC32 of the payload
//! ```
//!
//! Metadata holds the network spec, activation hyperparameters, batch-norm
//! constants and the length of every array that follows. Arrays are the
//! learnable tensors in registry order, then the batch-norm running buffers.

use std::fs;
use std::path::Path;

use super::network::{Layer, Network};
use super::spec::{DenoiseTarget, NetworkSpec, Task};
use crate::activations::{ActivationSpec, GradNorm};
use crate::error::{CheckpointError, Error, Result};
use crate::real::Real;
use crate::rng::Rng;

pub const MAGIC: &[u8; 8] = b"MTLUCKPT";
pub const VERSION: u16 = 1;

const ARRAY_PARAM: u8 = 0;
const ARRAY_BUFFER: u8 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v)
            .map_err(|_| Error::invalid(format!("{v} does not fit a u32 field")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                CheckpointError::Truncated(format!("needed {n} bytes at offset {}", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn grad_norm_code(g: GradNorm) -> u8 {
    match g {
        GradNorm::BinsPerSignal => 0,
        GradNorm::SignalCount => 1,
        GradNorm::Exact => 2,
    }
}

fn grad_norm_from(code: u8) -> Result<GradNorm, CheckpointError> {
    match code {
        0 => Ok(GradNorm::BinsPerSignal),
        1 => Ok(GradNorm::SignalCount),
        2 => Ok(GradNorm::Exact),
        c => Err(CheckpointError::Structure(format!(
            "unknown gradient normalization code {c}"
        ))),
    }
}

fn write_activation(w: &mut Writer, a: &ActivationSpec) -> Result<()> {
    // kind, bins|kernels|segments, width|interval, grad norm, shared
    let (kind, count, width, norm, shared) = match *a {
        ActivationSpec::Relu => (0, 0, 0.0, 0, false),
        ActivationSpec::Prelu => (1, 0, 0.0, 0, false),
        ActivationSpec::Mtlu {
            bins,
            bin_width,
            grad_norm,
            shared,
        } => (2, bins, bin_width, grad_norm_code(grad_norm), shared),
        ActivationSpec::Apl { kernels } => (3, kernels, 0.0, 0, false),
        ActivationSpec::Plf { segments, interval } => (4, segments, interval, 0, false),
        ActivationSpec::Maxout => (5, 0, 0.0, 0, false),
    };
    w.u8(kind);
    w.u32(count)?;
    w.f64(width);
    w.u8(norm);
    w.u8(shared as u8);
    Ok(())
}

fn read_activation(r: &mut Reader) -> Result<ActivationSpec, CheckpointError> {
    let kind = r.u8()?;
    let count = r.u32()?;
    let width = r.f64()?;
    let norm = r.u8()?;
    let shared = r.u8()? != 0;
    Ok(match kind {
        0 => ActivationSpec::Relu,
        1 => ActivationSpec::Prelu,
        2 => ActivationSpec::Mtlu {
            bins: count,
            bin_width: width,
            grad_norm: grad_norm_from(norm)?,
            shared,
        },
        3 => ActivationSpec::Apl { kernels: count },
        4 => ActivationSpec::Plf {
            segments: count,
            interval: width,
        },
        5 => ActivationSpec::Maxout,
        k => {
            return Err(CheckpointError::Structure(format!(
                "unknown activation code {k}"
            )))
        }
    })
}

fn bn_constants<T: Real>(net: &Network<T>) -> (f64, f64) {
    net.layers()
        .iter()
        .find_map(|l| match l {
            Layer::BatchNorm(p) => Some((p.momentum, p.eps)),
            _ => None,
        })
        .unwrap_or((
            crate::ops::batchnorm::DEFAULT_MOMENTUM,
            crate::ops::batchnorm::DEFAULT_EPS,
        ))
}

/// Serializes `net`. Parameters are stored as f32 whatever `T` is.
pub fn write_checkpoint<T: Real>(net: &Network<T>) -> Result<Vec<u8>> {
    let spec = net.spec();
    let mut meta = Writer(Vec::new());
    match spec.task {
        Task::SuperResolution { factor } => {
            meta.u8(0);
            meta.u32(factor)?;
        }
        Task::Denoise => {
            meta.u8(1);
            meta.u32(1)?;
        }
    }
    meta.u32(spec.depth)?;
    meta.u32(spec.width)?;
    meta.u32(spec.channels)?;
    meta.u8(spec.bicubic_skip as u8);
    meta.u8(match spec.denoise_target {
        DenoiseTarget::NoiseResidual => 0,
        DenoiseTarget::Direct => 1,
    });
    write_activation(&mut meta, &spec.activation)?;
    let (momentum, eps) = bn_constants(net);
    meta.f64(momentum);
    meta.f64(eps);

    let params = net.params();
    let buffers = net.buffers();
    meta.u32(params.len() + buffers.len())?;
    for p in &params {
        meta.u8(ARRAY_PARAM);
        meta.u32(p.len())?;
    }
    for b in &buffers {
        meta.u8(ARRAY_BUFFER);
        meta.u32(b.len())?;
    }

    let mut payload = Writer(Vec::new());
    payload.u32(meta.0.len())?;
    payload.0.extend_from_slice(&meta.0);
    let arrays = params
        .iter()
        .map(|t| t.data())
        .chain(buffers.iter().map(|b| b.as_slice()));
    for arr in arrays {
        for v in arr {
            payload
                .0
                .extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }

    let mut out = Vec::with_capacity(payload.0.len() + 14);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&payload.0);
    out.extend_from_slice(&crc32fast::hash(&payload.0).to_le_bytes());
    Ok(out)
}

/// Parses a checkpoint produced by [`write_checkpoint`].
pub fn read_checkpoint<T: Real>(bytes: &[u8]) -> Result<Network<T>> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    if bytes.len() < MAGIC.len() + 2 + 4 {
        return Err(CheckpointError::Truncated(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        ))
        .into());
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: VERSION,
        }
        .into());
    }
    let (payload, crc) = bytes[10..].split_at(bytes.len() - 14);
    let stored = u32::from_le_bytes(crc.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(CheckpointError::Checksum { stored, computed }.into());
    }

    let mut r = Reader {
        buf: payload,
        pos: 0,
    };
    let meta_len = r.u32()?;
    let meta_bytes = r.take(meta_len)?;
    let mut m = Reader {
        buf: meta_bytes,
        pos: 0,
    };
    let task_code = m.u8()?;
    let factor = m.u32()?;
    let task = match task_code {
        0 => Task::SuperResolution { factor },
        1 => Task::Denoise,
        t => return Err(CheckpointError::Structure(format!("unknown task code {t}")).into()),
    };
    let depth = m.u32()?;
    let width = m.u32()?;
    let channels = m.u32()?;
    let bicubic_skip = m.u8()? != 0;
    let denoise_target = match m.u8()? {
        0 => DenoiseTarget::NoiseResidual,
        1 => DenoiseTarget::Direct,
        t => return Err(CheckpointError::Structure(format!("unknown denoise target {t}")).into()),
    };
    let activation = read_activation(&mut m)?;
    let momentum = m.f64()?;
    let eps = m.f64()?;
    let count = m.u32()?;
    let mut lengths = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let kind = m.u8()?;
        lengths.push((kind, m.u32()?));
    }
    if m.remaining() != 0 {
        return Err(
            CheckpointError::Structure(format!("{} stray metadata bytes", m.remaining())).into(),
        );
    }

    let spec = NetworkSpec {
        task,
        depth,
        width,
        channels,
        activation,
        bicubic_skip,
        denoise_target,
    };
    let mut net = Network::<T>::build(spec, &mut Rng::new(0))
        .map_err(|e| CheckpointError::Structure(format!("stored spec is not buildable: {e}")))?;

    let expected: Vec<(u8, usize)> = net
        .params()
        .iter()
        .map(|t| (ARRAY_PARAM, t.len()))
        .chain(net.buffers().iter().map(|b| (ARRAY_BUFFER, b.len())))
        .collect();
    if expected.len() != lengths.len() {
        return Err(CheckpointError::Structure(format!(
            "spec implies {} arrays, header lists {}",
            expected.len(),
            lengths.len()
        ))
        .into());
    }
    let registry = net.registry();
    for (i, (want, got)) in expected.iter().zip(&lengths).enumerate() {
        if want != got {
            let name = registry
                .get(i)
                .map_or("running statistics", |p| p.name.as_str());
            return Err(CheckpointError::Structure(format!(
                "array {i} ({name}): spec implies length {}, header says {}",
                want.1, got.1
            ))
            .into());
        }
    }
    let total: usize = lengths.iter().map(|l| l.1).sum();
    if r.remaining() != total * 4 {
        return Err(CheckpointError::Structure(format!(
            "header lists {total} floats, payload holds {} bytes",
            r.remaining()
        ))
        .into());
    }

    let mut next = |dst: &mut [T]| -> Result<(), CheckpointError> {
        let raw = r.take(dst.len() * 4)?;
        for (d, c) in dst.iter_mut().zip(raw.chunks_exact(4)) {
            *d = T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64);
        }
        Ok(())
    };
    for t in net.params_mut() {
        next(t.data_mut())?;
    }
    for b in net.buffers_mut() {
        next(b)?;
    }
    for layer in net.layers_mut() {
        if let Layer::BatchNorm(p) = layer {
            p.momentum = momentum;
            p.eps = eps;
        }
    }
    Ok(net)
}

pub fn save_checkpoint<T: Real>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_checkpoint(net)?)?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Network<T>> {
    read_checkpoint(&fs::read(path)?)
}
