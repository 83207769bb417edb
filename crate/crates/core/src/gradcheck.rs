//! Finite-difference verification of every differentiable op.
//!
//! Each check draws random inputs in f64, reduces the op output with a
//! random linear projection `L = sum r * y`, and compares the tape gradient
//! of `L` with central differences of the pure forward functions. Inputs of
//! piecewise-linear ops are kept at least a quarter interval away from every
//! kink, so the finite differences never straddle one.

use std::fmt;

use crate::activations::{
    apl_forward, maxout_forward, mtlu_forward, plf_forward, prelu_forward, relu_forward,
    ActivationSpec, AnchorGrid, BinGeometry, GradNorm, MtluParams,
};
use crate::error::{Error, Result};
use crate::networks::{Network, NetworkSpec};
use crate::ops::{
    add, batchnorm_eval, batchnorm_train, conv2d, mse, pixel_shuffle, pixel_unshuffle, sub,
    BnParams, Mode,
};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{Shape, Tensor};

pub const TOLERANCE: f64 = 1e-4;
pub const DEFAULT_SEEDS: usize = 20;
const STEP: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

/// Which group of checks to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    All,
    Ops,
    Activations,
    Network,
}

impl Scope {
    pub fn parse(s: &str) -> Option<Scope> {
        match s {
            "all" => Some(Scope::All),
            "ops" => Some(Scope::Ops),
            "activations" => Some(Scope::Activations),
            "network" => Some(Scope::Network),
            _ => None,
        }
    }

    fn includes(self, group: Scope) -> bool {
        self == Scope::All || self == group
    }
}

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub scope: Scope,
    /// Random cases per check.
    pub seeds: usize,
    pub tolerance: f64,
    /// Test hook: scales the analytic MTLU gradients by this factor so the
    /// suite can be shown to catch a broken backward pass.
    pub corrupt_mtlu: Option<f64>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            scope: Scope::All,
            seeds: DEFAULT_SEEDS,
            tolerance: TOLERANCE,
            corrupt_mtlu: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub group: Scope,
    /// Worst relative error over all seeds and all inputs.
    pub worst: f64,
    pub cases: usize,
    pub passed: bool,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<16} worst_rel_err={:.3e} cases={} {}",
            self.name,
            self.worst,
            self.cases,
            if self.passed { "ok" } else { "FAIL" }
        )
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Central differences of `f` with respect to every element of `inputs[which]`.
pub fn numeric_gradient(
    inputs: &[Tensor<f64>],
    which: usize,
    h: f64,
    f: &dyn Fn(&[Tensor<f64>]) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs[which].len());
    for i in 0..inputs[which].len() {
        let orig = work[which].data()[i];
        work[which].data_mut()[i] = orig + h;
        let plus = f(&work)?;
        work[which].data_mut()[i] = orig - h;
        let minus = f(&work)?;
        work[which].data_mut()[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    Ok(out)
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

type RecordFn<'a> = dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var> + 'a;
type EvalFn<'a> = dyn Fn(&[Tensor<f64>]) -> Result<Tensor<f64>> + 'a;

/// One randomized comparison. `record` builds the op on a tape from the
/// input handles; `eval` is the pure forward. `scales[i]` multiplies the
/// analytic gradient of input `i` before comparing (used to undo MTLU's
/// gradient normalization).
fn compare(
    inputs: Vec<Tensor<f64>>,
    record: &RecordFn<'_>,
    eval: &EvalFn<'_>,
    scales: &[f64],
    rng: &mut Rng,
) -> Result<f64> {
    let out_shape = eval(&inputs)?.shape();
    let proj = Tensor::randn(out_shape, rng, 0.0, 1.0)?;
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let y = record(&mut tape, &vars)?;
    let loss = tape.weighted_sum(y, &proj)?;
    tape.backward(loss)?;
    let f = |xs: &[Tensor<f64>]| -> Result<f64> { Ok(dot(&eval(xs)?, &proj)) };
    let mut worst = 0.0f64;
    for (i, v) in vars.iter().enumerate() {
        let numeric = numeric_gradient(&inputs, i, STEP, &f)?;
        let scale = scales.get(i).copied().unwrap_or(1.0);
        let analytic = tape
            .grad(*v)
            .ok_or_else(|| Error::Internal(format!("input {i} received no gradient")))?;
        for (a, n) in analytic.iter().zip(&numeric) {
            worst = worst.max(relative_error(a * scale, *n));
        }
    }
    Ok(worst)
}

fn small_shape(rng: &mut Rng) -> Shape {
    Shape::new(
        1 + rng.below(2),
        1 + rng.below(8),
        1 + rng.below(6),
        1 + rng.below(6),
    )
}

fn randn(shape: impl Into<Shape>, rng: &mut Rng, std: f64) -> Result<Tensor<f64>> {
    Tensor::randn(shape.into(), rng, 0.0, std)
}

/// Values at least `margin * spacing` away from the lattice `first + k * spacing`.
fn off_lattice(
    n: usize,
    first: f64,
    spacing: f64,
    lo: i64,
    hi: i64,
    margin: f64,
    rng: &mut Rng,
) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let k = lo + rng.below((hi - lo) as usize) as i64;
            first + (k as f64 + rng.uniform(margin, 1.0 - margin)) * spacing
        })
        .collect()
}

/// Values at least `margin` away from every point in `kinks`.
fn avoiding(n: usize, kinks: &[f64], margin: f64, spread: f64, rng: &mut Rng) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let v = rng.uniform(-spread, spread);
            if kinks.iter().all(|k| (v - k).abs() >= margin) {
                break v;
            }
        })
        .collect()
}

type CheckFn = fn(&mut Rng, &GradcheckOptions) -> Result<f64>;

fn check_conv(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    let s = Shape::new(s.n, s.c, s.h.max(2), s.w.max(2));
    let out = 1 + rng.below(4);
    let k = [1, 3][rng.below(2)];
    let inputs = vec![
        randn(s, rng, 1.0)?,
        randn([out, s.c, k, k], rng, 0.5)?,
        randn([1, out, 1, 1], rng, 0.5)?,
    ];
    compare(
        inputs,
        &|t, v| t.conv2d(v[0], v[1], v[2]),
        &|x| conv2d(&x[0], &x[1], &x[2]),
        &[],
        rng,
    )
}

fn check_bn_train(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let mut s = small_shape(rng);
    if s.n * s.h * s.w < 4 {
        s.h = 2;
        s.w = 2;
    }
    let eps = crate::ops::batchnorm::DEFAULT_EPS;
    let inputs = vec![
        randn(s, rng, 1.5)?,
        randn([1, s.c, 1, 1], rng, 1.0)?,
        randn([1, s.c, 1, 1], rng, 1.0)?,
    ];
    compare(
        inputs,
        &|t, v| Ok(t.batchnorm_train(v[0], v[1], v[2], eps)?.0),
        &|x| Ok(batchnorm_train(&x[0], &x[1], &x[2], eps)?.0),
        &[],
        rng,
    )
}

fn check_bn_eval(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    let mut p = BnParams::<f64>::new(s.c)?;
    for c in 0..s.c {
        p.running_mean[c] = rng.normal();
        p.running_var[c] = rng.uniform(0.2, 2.0);
    }
    let inputs = vec![
        randn(s, rng, 1.0)?,
        randn([1, s.c, 1, 1], rng, 1.0)?,
        randn([1, s.c, 1, 1], rng, 1.0)?,
    ];
    let p2 = p.clone();
    compare(
        inputs,
        &move |t, v| t.batchnorm_eval(v[0], v[1], v[2], &p),
        &move |x| {
            let mut q = p2.clone();
            q.gamma = x[1].clone();
            q.beta = x[2].clone();
            batchnorm_eval(&x[0], &q)
        },
        &[],
        rng,
    )
}

fn check_shuffle(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let r = 2 + rng.below(2);
    let s = Shape::new(
        1 + rng.below(2),
        (1 + rng.below(2)) * r * r,
        1 + rng.below(4),
        1 + rng.below(4),
    );
    compare(
        vec![randn(s, rng, 1.0)?],
        &move |t, v| t.pixel_shuffle(v[0], r),
        &move |x| pixel_shuffle(&x[0], r),
        &[],
        rng,
    )
}

fn check_unshuffle(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let r = 2 + rng.below(2);
    let s = Shape::new(
        1 + rng.below(2),
        1 + rng.below(3),
        r * (1 + rng.below(3)),
        r * (1 + rng.below(3)),
    );
    compare(
        vec![randn(s, rng, 1.0)?],
        &move |t, v| t.pixel_unshuffle(v[0], r),
        &move |x| pixel_unshuffle(&x[0], r),
        &[],
        rng,
    )
}

fn check_add(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    compare(
        vec![randn(s, rng, 1.0)?, randn(s, rng, 1.0)?],
        &|t, v| {
            let a = t.add(v[0], v[1])?;
            t.sub(a, v[1]).and_then(|d| t.add(d, v[1]))
        },
        &|x| add(&sub(&add(&x[0], &x[1])?, &x[1])?, &x[1]),
        &[],
        rng,
    )
}

fn check_mse(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    compare(
        vec![randn(s, rng, 1.0)?, randn(s, rng, 1.0)?],
        &|t, v| t.mse_loss(v[0], v[1]),
        &|x| Ok(Tensor::scalar(mse(&x[0], &x[1])?)),
        &[],
        rng,
    )
}

fn random_geometry(rng: &mut Rng) -> Result<BinGeometry> {
    let bins = [20, 40, 80][rng.below(3)];
    let width = [0.05, 0.1, 0.025][rng.below(3)];
    BinGeometry::centered(bins, width)
}

fn mtlu_inputs(s: Shape, g: &BinGeometry, rng: &mut Rng) -> Result<Tensor<f64>> {
    let k = g.num_bins() as i64;
    let data = off_lattice(
        s.numel(),
        g.left_edge(),
        g.bin_width(),
        -3,
        k + 3,
        0.25,
        rng,
    );
    Tensor::from_vec(s, data)
}

fn check_mtlu(rng: &mut Rng, opts: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    let g = random_geometry(rng)?;
    let groups = if rng.below(4) == 0 { 1 } else { s.c };
    let k = g.num_bins();
    let norm = GradNorm::BinsPerSignal;
    let signals = s.numel() / groups;
    let divisor = norm.divisor(signals, k);
    let corrupt = opts.corrupt_mtlu.unwrap_or(1.0);
    let inputs = vec![
        mtlu_inputs(s, &g, rng)?,
        randn([1, groups, 1, k], rng, 1.0)?,
        randn([1, groups, 1, k], rng, 1.0)?,
    ];
    compare(
        inputs,
        &move |t, v| t.mtlu(v[0], v[1], v[2], g, norm),
        &move |x| {
            let mut p = MtluParams::identity(groups, g)?;
            p.slopes = x[1].clone();
            p.offsets = x[2].clone();
            mtlu_forward(&x[0], &p)
        },
        &[corrupt, divisor * corrupt, divisor * corrupt],
        rng,
    )
}

fn check_relu(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    let x = Tensor::from_vec(s, avoiding(s.numel(), &[0.0], 0.05, 2.0, rng))?;
    compare(
        vec![x],
        &|t, v| t.relu(v[0]),
        &|x| Ok(relu_forward(&x[0])),
        &[],
        rng,
    )
}

fn check_prelu(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    let x = Tensor::from_vec(s, avoiding(s.numel(), &[0.0], 0.05, 2.0, rng))?;
    compare(
        vec![x, randn([1, s.c, 1, 1], rng, 0.5)?],
        &|t, v| t.prelu(v[0], v[1]),
        &|x| prelu_forward(&x[0], &x[1]),
        &[],
        rng,
    )
}

fn check_maxout(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let mut s = small_shape(rng);
    s.c = 2 * (1 + rng.below(4));
    let mut x = randn(s, rng, 1.0)?;
    // separate each pair by at least 0.05
    for n in 0..s.n {
        for j in 0..s.c / 2 {
            for i in 0..s.h * s.w {
                let a = s.index(n, 2 * j, i / s.w, i % s.w);
                let b = s.index(n, 2 * j + 1, i / s.w, i % s.w);
                let d = x.data()[a] - x.data()[b];
                if d.abs() < 0.05 {
                    let shift = if d >= 0.0 { 0.05 } else { -0.05 };
                    x.data_mut()[a] += shift;
                }
            }
        }
    }
    compare(
        vec![x],
        &|t, v| t.maxout(v[0]),
        &|x| maxout_forward(&x[0]),
        &[],
        rng,
    )
}

fn check_apl(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    let kernels = 1 + rng.below(5);
    let a = randn([1, s.c, 1, kernels], rng, 0.5)?;
    let hinges: Vec<f64> = off_lattice(s.c * kernels, -1.0, 0.25, 0, 8, 0.1, rng);
    let b = Tensor::from_vec([1, s.c, 1, kernels], hinges.clone())?;
    let mut kinks = hinges;
    kinks.push(0.0);
    // hinge positions move by up to STEP during differencing; keep x clear of them
    let x = Tensor::from_vec(s, avoiding(s.numel(), &kinks, 0.01, 2.0, rng))?;
    compare(
        vec![x, a, b],
        &|t, v| t.apl(v[0], v[1], v[2]),
        &|x| apl_forward(&x[0], &x[1], &x[2]),
        &[],
        rng,
    )
}

fn check_plf(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let s = small_shape(rng);
    let segments = [4, 10, 40][rng.below(3)];
    let grid = AnchorGrid::centered(segments, [0.05, 0.1][rng.below(2)])?;
    let data = off_lattice(
        s.numel(),
        grid.first(),
        grid.interval(),
        -3,
        segments as i64 + 3,
        0.25,
        rng,
    );
    let x = Tensor::from_vec(s, data)?;
    let values = randn([1, s.c, 1, segments + 1], rng, 1.0)?;
    compare(
        vec![x, values],
        &move |t, v| t.plf(v[0], v[1], grid),
        &move |x| plf_forward(&x[0], &x[1], &grid),
        &[],
        rng,
    )
}

/// Conv followed by MTLU, differentiated with respect to the conv weights
/// with exact (unnormalized) MTLU gradients.
fn check_conv_mtlu(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let g = BinGeometry::centered(40, 0.05)?;
    for _ in 0..1000 {
        let s = Shape::new(1, 2, 4, 4);
        let x = randn(s, rng, 0.5)?;
        let w = randn([3, 2, 3, 3], rng, 0.3)?;
        let b = randn([1, 3, 1, 1], rng, 0.1)?;
        let pre = conv2d(&x, &w, &b)?;
        let clear = pre.data().iter().all(|&v| {
            let t = (v - g.left_edge()) / g.bin_width();
            (t - t.round()).abs() * g.bin_width() > 1e-3
        });
        if !clear {
            continue;
        }
        let mut p = crate::activations::relu_params::<f64>(3, g)?;
        for v in p.slopes.data_mut().iter_mut().chain(p.offsets.data_mut()) {
            *v += 0.3 * rng.normal();
        }
        p.grad_norm = GradNorm::Exact;
        let (slopes, offsets) = (p.slopes.clone(), p.offsets.clone());
        return compare(
            vec![x, w, b, slopes, offsets],
            &move |t, v| {
                let y = t.conv2d(v[0], v[1], v[2])?;
                t.mtlu(y, v[3], v[4], g, GradNorm::Exact)
            },
            &move |x| {
                let mut q = p.clone();
                q.slopes = x[3].clone();
                q.offsets = x[4].clone();
                mtlu_forward(&conv2d(&x[0], &x[1], &x[2])?, &q)
            },
            &[],
            rng,
        );
    }
    Err(Error::Internal("no kink-free conv+mtlu case found".into()))
}

/// Directional derivative of a 3-layer MTLU FSRnet (train-mode batch norm)
/// along a random parameter direction, against a central difference.
fn check_network(rng: &mut Rng, _: &GradcheckOptions) -> Result<f64> {
    let act = ActivationSpec::Mtlu {
        bins: 8,
        bin_width: 0.25,
        grad_norm: GradNorm::Exact,
        shared: false,
    };
    let spec = NetworkSpec::fsrnet(2, 3, 4, act);
    let h = 1e-6;
    for _ in 0..200 {
        let mut net: Network<f64> = Network::build(spec, rng)?;
        for p in net.params_mut() {
            for v in p.data_mut() {
                *v += 0.2 * rng.normal();
            }
        }
        let x = randn([2, 1, 4, 4], rng, 0.5)?;
        let proj = randn(spec.output_shape(x.shape())?, rng, 1.0)?;
        let dir: Vec<Tensor<f64>> = net
            .params()
            .iter()
            .map(|t| randn(t.shape(), rng, 1.0))
            .collect::<Result<_>>()?;

        // every MTLU input must stay clear of the anchors under the perturbation
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let rec = net.record(&mut tape, xv, Mode::Train)?;
        let act_inputs = activation_inputs(&net, &x)?;
        let margin = 1e-3;
        let clear = act_inputs.iter().all(|&v| {
            let t = v / 0.25;
            (t - t.round()).abs() * 0.25 > margin
        });
        if !clear {
            continue;
        }
        let loss = tape.weighted_sum(rec.output, &proj)?;
        tape.backward(loss)?;
        let grads = net.gradients(&tape, &rec)?;
        let analytic: f64 = grads
            .iter()
            .zip(&dir)
            .map(|(g, d)| g.iter().zip(d.data()).map(|(a, b)| a * b).sum::<f64>())
            .sum();

        let eval_at = |sign: f64| -> Result<f64> {
            let mut moved = net.clone();
            for (p, d) in moved.params_mut().into_iter().zip(&dir) {
                for (v, dv) in p.data_mut().iter_mut().zip(d.data()) {
                    *v += sign * h * dv;
                }
            }
            let mut t = Tape::new();
            let xv = t.constant(x.clone());
            let r = moved.record(&mut t, xv, Mode::Train)?;
            Ok(dot(t.value(r.output), &proj))
        };
        let numeric = (eval_at(1.0)? - eval_at(-1.0)?) / (2.0 * h);
        return Ok(relative_error(analytic, numeric));
    }
    Err(Error::Internal("no kink-free network case found".into()))
}

/// Inputs to every activation layer of `net` in train mode.
fn activation_inputs(net: &Network<f64>, x: &Tensor<f64>) -> Result<Vec<f64>> {
    use crate::networks::Layer;
    let mut out = Vec::new();
    let mut stack = Vec::new();
    let mut cur = x.clone();
    for layer in net.layers() {
        cur = match layer {
            Layer::Conv(p) => conv2d(&cur, &p.weight, &p.bias)?,
            Layer::BatchNorm(p) => batchnorm_train(&cur, &p.gamma, &p.beta, p.eps)?.0,
            Layer::Activation(a) => {
                out.extend_from_slice(cur.data());
                a.forward(&cur)?
            }
            Layer::Shuffle(r) => pixel_shuffle(&cur, *r)?,
            Layer::Unshuffle(r) => pixel_unshuffle(&cur, *r)?,
            Layer::ResidualMark => {
                stack.push(cur.clone());
                cur
            }
            Layer::ResidualAdd => add(&stack.pop().unwrap_or_else(|| cur.clone()), &cur)?,
            _ => cur,
        };
    }
    Ok(out)
}

fn checks() -> Vec<(&'static str, Scope, CheckFn)> {
    vec![
        ("conv2d", Scope::Ops, check_conv as CheckFn),
        ("batchnorm_train", Scope::Ops, check_bn_train),
        ("batchnorm_eval", Scope::Ops, check_bn_eval),
        ("pixel_shuffle", Scope::Ops, check_shuffle),
        ("pixel_unshuffle", Scope::Ops, check_unshuffle),
        ("add", Scope::Ops, check_add),
        ("mse_loss", Scope::Ops, check_mse),
        ("mtlu", Scope::Activations, check_mtlu),
        ("relu", Scope::Activations, check_relu),
        ("prelu", Scope::Activations, check_prelu),
        ("maxout", Scope::Activations, check_maxout),
        ("apl", Scope::Activations, check_apl),
        ("plf", Scope::Activations, check_plf),
        ("conv+mtlu", Scope::Network, check_conv_mtlu),
        ("network_jvp", Scope::Network, check_network),
    ]
}

/// Runs the checks selected by `opts.scope`, `opts.seeds` cases each.
pub fn run(opts: &GradcheckOptions) -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();
    for (i, (name, group, check)) in checks().into_iter().enumerate() {
        if !opts.scope.includes(group) {
            continue;
        }
        let mut worst = 0.0f64;
        for seed in 0..opts.seeds {
            let mut rng = Rng::new(seed as u64).fork(i as u64);
            worst = worst.max(check(&mut rng, opts)?);
        }
        results.push(CheckResult {
            name,
            group,
            worst,
            cases: opts.seeds,
            passed: worst < opts.tolerance,
        });
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn numeric_gradient_of_square() {
        let x = Tensor::from_vec([1, 1, 1, 2], vec![3.0, -1.0]).unwrap();
        let g = numeric_gradient(&[x], 0, 1e-4, &|xs| {
            Ok(xs[0].data().iter().map(|v| v * v).sum())
        })
        .unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8 && (g[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn off_lattice_respects_margin() {
        let mut rng = Rng::new(1);
        for v in off_lattice(1000, -1.0, 0.05, -3, 43, 0.25, &mut rng) {
            let t = (v + 1.0) / 0.05;
            assert!((t - t.floor()) >= 0.25 - 1e-9 && (t - t.floor()) <= 0.75 + 1e-9);
        }
    }

    #[test]
    fn quick_suite_passes() {
        let opts = GradcheckOptions {
            seeds: 2,
            ..GradcheckOptions::default()
        };
        for r in run(&opts).unwrap() {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn corrupted_mtlu_is_caught() {
        let opts = GradcheckOptions {
            scope: Scope::Activations,
            seeds: 2,
            corrupt_mtlu: Some(1.01),
            ..GradcheckOptions::default()
        };
        let results = run(&opts).unwrap();
        let failed: Vec<&str> = results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name)
            .collect();
        assert_eq!(failed, ["mtlu"]);
    }
}
