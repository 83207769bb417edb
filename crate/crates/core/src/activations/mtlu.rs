//! Multi-bin trainable linear unit.
//!
//! The real line is split into `K` equal bins of width `w` starting at
//! `left_edge`; bin `k` carries its own affine map `a[k] * x + b[k]`. Inputs
//! left of the first bin use bin `0` and inputs right of the last bin use bin
//! `K - 1`, so `K` bins give exactly `2K` parameters per channel. Locating a
//! bin is one division and a floor, so the cost per element does not depend
//! on `K`.
//!
//! An input lying exactly on an interior anchor belongs to the bin on its
//! right (floor semantics). The forward map is generally discontinuous at
//! anchors.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tape::{Tape, Var};
use crate::tensor::{Shape, Tensor};

pub const DEFAULT_BINS: usize = 40;
pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

/// Placement of the bins on the real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinGeometry {
    num_bins: usize,
    bin_width: f64,
    left_edge: f64,
}

impl BinGeometry {
    pub fn new(num_bins: usize, bin_width: f64, left_edge: f64) -> Result<Self> {
        if num_bins == 0 || num_bins >= 1 << 30 {
            return Err(Error::invalid(format!("bin count {num_bins} out of range")));
        }
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::invalid(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        if !left_edge.is_finite() {
            return Err(Error::invalid("left edge must be finite"));
        }
        Ok(BinGeometry {
            num_bins,
            bin_width,
            left_edge,
        })
    }

    /// Bins centred on zero: `left_edge = -num_bins * bin_width / 2`.
    pub fn centered(num_bins: usize, bin_width: f64) -> Result<Self> {
        Self::new(num_bins, bin_width, -(num_bins as f64) * bin_width / 2.0)
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn left_edge(&self) -> f64 {
        self.left_edge
    }

    pub fn right_edge(&self) -> f64 {
        self.left_edge + self.num_bins as f64 * self.bin_width
    }

    /// Lower edge of bin `k` (`k = num_bins` gives the right edge). For
    /// interior anchors this is the lowest f64 the locator assigns to bin
    /// `k`, which can sit an ulp away from `left_edge + k * bin_width`.
    pub fn anchor(&self, k: usize) -> f64 {
        let nominal = match self.origin() {
            Some(o) => (o + k as i64) as f64 * self.bin_width,
            None => self.left_edge + k as f64 * self.bin_width,
        };
        if k == 0 || k >= self.num_bins {
            return nominal;
        }
        let loc = self.locator::<f64>();
        let mut a = nominal;
        while loc.locate(a) < k {
            a = a.next_up();
        }
        while loc.locate(a.next_down()) >= k {
            a = a.next_down();
        }
        a
    }

    /// `left_edge / bin_width` when it is an integer. Bins are then located
    /// as `floor(x / w) - origin`, which keeps anchors exact (in particular
    /// zero, when it is an anchor).
    fn origin(&self) -> Option<i64> {
        let o = self.left_edge / self.bin_width;
        let r = o.round();
        ((o - r).abs() <= 1e-9 * r.abs().max(1.0) && r.abs() < (1u64 << 30) as f64)
            .then_some(r as i64)
    }

    /// Bin owning `x`, with tails clamped to the edge bins.
    pub fn bin_index(&self, x: f64) -> Result<usize> {
        if x.is_nan() {
            return Err(Error::invalid("bin index of NaN"));
        }
        Ok(self.locator::<f64>().locate(x))
    }

    pub(crate) fn locator<T: Real>(&self) -> Locator<T> {
        let (shift, origin) = match self.origin() {
            Some(o) => (T::zero(), o as i32),
            None => (T::from_f64(self.left_edge), 0),
        };
        Locator {
            width: T::from_f64(self.bin_width),
            shift,
            lo: origin as f64,
            hi: (origin as i64 + self.num_bins as i64 - 1) as f64,
            base: origin as f64,
        }
    }
}

/// `x + ROUND - ROUND` rounds an f64 of magnitude below 2^51 to the nearest
/// integer.
const ROUND: f64 = 6_755_399_441_055_744.0;

/// Inputs per index block in the forward and backward loops.
const BLOCK: usize = 256;

#[derive(Clone, Copy)]
pub(crate) struct Locator<T> {
    width: T,
    /// Subtracted before dividing: the left edge, or zero when the origin
    /// is integral.
    shift: T,
    /// Lowest and highest admissible floor values.
    lo: f64,
    hi: f64,
    base: f64,
}

impl<T: Real> Locator<T> {
    /// Clamping before flooring gives the same bin as flooring first. The
    /// floor is done in floating point so the loop has no branches and no
    /// saturating casts, which lets it vectorize. NaN lands in bin 0.
    #[inline(always)]
    pub(crate) fn locate(&self, x: T) -> usize {
        let q = ((x - self.shift) / self.width).as_f64();
        let q = if q < self.lo { self.lo } else { q };
        let q = if q > self.hi { self.hi } else { q };
        let r = (q + ROUND) - ROUND;
        let r = if r > q { r - 1.0 } else { r };
        (r - self.base) as usize
    }

    #[inline]
    fn locate_block(&self, xs: &[T], idx: &mut [u32]) {
        for (j, &x) in idx.iter_mut().zip(xs) {
            *j = self.locate(x) as u32;
        }
    }
}

/// Normalization applied to the slope/offset gradients.
///
/// The exact gradient of `a[k]` is `sum x_i * g_i` over the inputs in bin `k`.
/// Per-bin averaging would divide by the bin's population; instead a constant
/// `N` is used for every bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GradNorm {
    /// `N = signals_per_channel / num_bins`: the average bin population.
    #[default]
    BinsPerSignal,
    /// `N = signals_per_channel`.
    SignalCount,
    /// `N = 1`: the exact derivative of the loss.
    Exact,
}

impl GradNorm {
    /// The divisor `N` for a channel with `signals` inputs.
    pub fn divisor(self, signals: usize, num_bins: usize) -> f64 {
        match self {
            GradNorm::BinsPerSignal => signals as f64 / num_bins as f64,
            GradNorm::SignalCount => signals as f64,
            GradNorm::Exact => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GradNorm::BinsPerSignal => "bins_per_signal",
            GradNorm::SignalCount => "signal_count",
            GradNorm::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bins_per_signal" => Some(GradNorm::BinsPerSignal),
            "signal_count" => Some(GradNorm::SignalCount),
            "exact" => Some(GradNorm::Exact),
            _ => None,
        }
    }
}

/// Learnable MTLU state. Slopes and offsets are `(1, G, 1, K)` tensors where
/// `G` is the channel count, or 1 when one function is shared by all channels.
#[derive(Clone, Debug, PartialEq)]
pub struct MtluParams<T> {
    pub geometry: BinGeometry,
    pub slopes: Tensor<T>,
    pub offsets: Tensor<T>,
    pub grad_norm: GradNorm,
}

impl<T: Real> MtluParams<T> {
    /// All bins set to the identity map.
    pub fn identity(groups: usize, geometry: BinGeometry) -> Result<Self> {
        let k = geometry.num_bins();
        Ok(MtluParams {
            geometry,
            slopes: Tensor::full([1, groups, 1, k], T::one())?,
            offsets: Tensor::zeros([1, groups, 1, k])?,
            grad_norm: GradNorm::default(),
        })
    }

    pub fn groups(&self) -> usize {
        self.slopes.shape().c
    }

    pub fn is_shared(&self) -> bool {
        self.groups() == 1
    }

    pub fn param_count(&self) -> usize {
        self.slopes.len() + self.offsets.len()
    }

    pub fn cast<U: Real>(&self) -> MtluParams<U> {
        MtluParams {
            geometry: self.geometry,
            slopes: self.slopes.cast(),
            offsets: self.offsets.cast(),
            grad_norm: self.grad_norm,
        }
    }

    /// Evaluates the activation of `group` at a single point.
    pub fn eval(&self, group: usize, x: T) -> T {
        let k = self.geometry.locator::<T>().locate(x);
        let base = group * self.geometry.num_bins();
        self.slopes.data()[base + k] * x + self.offsets.data()[base + k]
    }
}

/// Parameters for which the activation equals `max(0, x)` everywhere.
///
/// Zero must be an interior anchor, which for centred bins means an even bin
/// count.
pub fn mtlu_init_relu<T: Real>(
    channels: usize,
    num_bins: usize,
    bin_width: f64,
) -> Result<MtluParams<T>> {
    let geometry = BinGeometry::centered(num_bins, bin_width)?;
    relu_params(channels, geometry)
}

/// [`mtlu_init_relu`] for an arbitrary geometry.
pub fn relu_params<T: Real>(groups: usize, geometry: BinGeometry) -> Result<MtluParams<T>> {
    let zero_bin = match geometry.origin() {
        Some(o) if o < 0 && -o < geometry.num_bins() as i64 => (-o) as usize,
        _ => {
            return Err(Error::invalid(format!(
                "zero is not an interior anchor of {} bins of width {} from {}; \
                 the activation cannot equal ReLU exactly",
                geometry.num_bins(),
                geometry.bin_width(),
                geometry.left_edge()
            )))
        }
    };
    let mut p = MtluParams::identity(groups, geometry)?;
    let k = geometry.num_bins();
    for g in 0..groups {
        p.slopes.data_mut()[g * k..g * k + zero_bin].fill(T::zero());
    }
    Ok(p)
}

fn check_groups<T: Real>(x: Shape, p: &MtluParams<T>) -> Result<()> {
    let k = p.geometry.num_bins();
    if p.slopes.shape() != p.offsets.shape() || p.slopes.shape().w != k {
        return Err(Error::shape(format!(
            "MTLU tables {} / {} do not hold {k} bins",
            p.slopes.shape(),
            p.offsets.shape()
        )));
    }
    let g = p.groups();
    if g != 1 && g != x.c {
        return Err(Error::ChannelMismatch {
            expected: g,
            got: x.c,
        });
    }
    Ok(())
}

/// `a[c][k] * x + b[c][k]` with `k` the bin owning `x`.
pub fn mtlu_forward<T: Real>(x: &Tensor<T>, p: &MtluParams<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    check_groups(s, p)?;
    let k = p.geometry.num_bins();
    let loc = p.geometry.locator::<T>();
    let shared = p.is_shared();
    let plane = s.plane();
    let mut out = Tensor::zeros(s)?;
    if plane == 0 {
        return Ok(out);
    }
    let (src, dst) = (x.data(), out.data_mut());
    let mut idx = [0u32; BLOCK];
    let mut table = vec![[T::zero(); 2]; k];
    for (i, (o, v)) in dst.chunks_mut(plane).zip(src.chunks(plane)).enumerate() {
        let g = if shared { 0 } else { i % s.c };
        if i == 0 || !shared {
            let a = &p.slopes.data()[g * k..(g + 1) * k];
            let b = &p.offsets.data()[g * k..(g + 1) * k];
            for (t, (&a, &b)) in table.iter_mut().zip(a.iter().zip(b)) {
                *t = [a, b];
            }
        }
        for (o, v) in o.chunks_mut(BLOCK).zip(v.chunks(BLOCK)) {
            loc.locate_block(v, &mut idx);
            for ((o, &v), &j) in o.iter_mut().zip(v).zip(&idx) {
                let [a, b] = table[(j as usize).min(k - 1)];
                *o = a * v + b;
            }
        }
    }
    Ok(out)
}

/// Gradients of [`mtlu_forward`].
///
/// `dx` uses the slope of the owning bin. The slope and offset gradients sum
/// `x * dy` and `dy` per bin and divide by the constant `N` chosen by
/// `p.grad_norm`, counted over the inputs that share a parameter group.
pub fn mtlu_backward<T: Real>(
    x: &Tensor<T>,
    dy: &[T],
    p: &MtluParams<T>,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let s = x.shape();
    check_groups(s, p)?;
    if dy.len() != x.len() {
        return Err(Error::shape("mtlu_backward: gradient length"));
    }
    let k = p.geometry.num_bins();
    let loc = p.geometry.locator::<T>();
    let shared = p.is_shared();
    let plane = s.plane();
    let mut dx = vec![T::zero(); x.len()];
    let mut da = vec![T::zero(); p.slopes.len()];
    let mut db = vec![T::zero(); p.offsets.len()];
    let mut idx = [0u32; BLOCK];
    if plane > 0 {
        for (i, ((dxp, xp), gp)) in dx
            .chunks_mut(plane)
            .zip(x.data().chunks(plane))
            .zip(dy.chunks(plane))
            .enumerate()
        {
            let g = if shared { 0 } else { i % s.c };
            let a = &p.slopes.data()[g * k..(g + 1) * k];
            let (da, db) = (&mut da[g * k..(g + 1) * k], &mut db[g * k..(g + 1) * k]);
            for ((dxp, xp), gp) in dxp
                .chunks_mut(BLOCK)
                .zip(xp.chunks(BLOCK))
                .zip(gp.chunks(BLOCK))
            {
                loc.locate_block(xp, &mut idx);
                for (((d, &v), &up), &j) in dxp.iter_mut().zip(xp).zip(gp).zip(&idx) {
                    let j = (j as usize).min(k - 1);
                    *d = a[j] * up;
                    da[j] += v * up;
                    db[j] += up;
                }
            }
        }
    }
    let signals = if shared { x.len() } else { s.per_channel() };
    let inv = T::from_f64(1.0 / p.grad_norm.divisor(signals, k));
    da.iter_mut().chain(db.iter_mut()).for_each(|v| *v *= inv);
    Ok((dx, da, db))
}

impl<T: Real> Tape<T> {
    pub fn mtlu(
        &mut self,
        x: Var,
        slopes: Var,
        offsets: Var,
        geometry: BinGeometry,
        grad_norm: GradNorm,
    ) -> Result<Var> {
        let params = MtluParams {
            geometry,
            slopes: self.value(slopes).clone(),
            offsets: self.value(offsets).clone(),
            grad_norm,
        };
        let y = mtlu_forward(self.value(x), &params)?;
        self.push_op(
            y,
            &[x, slopes, offsets],
            Box::new(move |ctx| {
                let (dx, da, db) = mtlu_backward(ctx.inputs[0], ctx.grad, &params)?;
                Ok(vec![Some(dx), Some(da), Some(db)])
            }),
        )
    }
}
