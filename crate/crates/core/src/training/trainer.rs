//! The training loop.

use std::fmt;
use std::io::Write;

use super::adam::Adam;
use super::schedule::LrSchedule;
use crate::data::{eval_with, Dataset, Degradation, EvalPair};
use crate::error::{Error, Result};
use crate::networks::{Network, Task};
use crate::ops::Mode;
use crate::real::Real;
use crate::rng::Rng;
use crate::tape::Tape;

pub const DEFAULT_BATCH: usize = 32;
pub const DEFAULT_LR: f64 = 1e-3;
pub const DEFAULT_LR_STOP: f64 = 1e-5;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_init: f64,
    /// `None` spreads the halvings evenly over `max_iters`.
    pub lr_halve_every: Option<usize>,
    pub lr_stop_below: f64,
    /// L2 factor for convolution parameters only.
    pub weight_decay: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Network input patch side (low resolution for SR).
    pub patch: usize,
    /// Iterations per report record.
    pub log_every: usize,
    /// Iterations between validation passes; 0 validates only at the end.
    pub val_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: DEFAULT_BATCH,
            lr_init: DEFAULT_LR,
            lr_halve_every: None,
            lr_stop_below: DEFAULT_LR_STOP,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            max_iters: 1000,
            seed: 0,
            patch: 24,
            log_every: 100,
            val_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        match self.lr_halve_every {
            Some(halve_every) => LrSchedule {
                lr_init: self.lr_init,
                halve_every,
                stop_below: self.lr_stop_below,
            },
            None => LrSchedule::scaled_to(self.max_iters, self.lr_init, self.lr_stop_below),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patch == 0 || self.log_every == 0 {
            return Err(Error::invalid(
                "batch size, patch size and log interval must be positive",
            ));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        self.schedule().validate()
    }
}

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRecord {
    /// Iterations completed.
    pub iter: usize,
    pub lr: f64,
    /// Mean loss over the iterations since the previous record.
    pub loss: f64,
    pub val_psnr: Option<f64>,
}

impl fmt::Display for TrainRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} lr={:e} loss={:.8e}",
            self.iter, self.lr, self.loss
        )?;
        if let Some(p) = self.val_psnr {
            write!(f, " val_psnr={}", crate::data::eval::format_db(p))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    MaxIters,
    /// The learning rate fell below the stop threshold.
    LrBelowThreshold,
    /// Training hit a non-finite loss or gradient. The network holds the
    /// parameters from before the failing step.
    NonFinite {
        iter: usize,
        what: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub records: Vec<TrainRecord>,
    /// Loss of every iteration.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
    pub final_val_psnr: Option<f64>,
}

impl TrainReport {
    pub fn write_lines(&self, mut out: impl Write) -> Result<()> {
        for r in &self.records {
            writeln!(out, "{r}")?;
        }
        Ok(())
    }

    /// Mean loss of the first and last `fraction` of iterations.
    pub fn head_tail_loss(&self, fraction: f64) -> (f64, f64) {
        let n = self.losses.len();
        let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        (
            mean(&self.losses[..k.min(n)]),
            mean(&self.losses[n - k.min(n)..]),
        )
    }
}

/// Validation images for [`train`].
pub struct Validation<'a> {
    pub pairs: &'a [EvalPair],
    pub degradation: Degradation,
}

/// Owns the optimizer and the sampling RNG across iterations.
pub struct Trainer<T> {
    pub cfg: TrainConfig,
    schedule: LrSchedule,
    opt: Adam<T>,
    rng: Rng,
    iter: usize,
}

impl<T: Real> Trainer<T> {
    pub fn new(net: &Network<T>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Trainer {
            cfg,
            schedule: cfg.schedule(),
            opt: Adam::for_registry(&net.registry()),
            rng: Rng::new(cfg.seed).fork(1),
            iter: 0,
        })
    }

    pub fn schedule(&self) -> &LrSchedule {
        &self.schedule
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn optimizer(&self) -> &Adam<T> {
        &self.opt
    }

    /// Samples a batch, backpropagates the MSE loss and updates `net`.
    /// Returns the batch loss. On a non-finite loss or gradient, `net` is
    /// left untouched.
    pub fn step(&mut self, net: &mut Network<T>, data: &Dataset) -> Result<f64> {
        let batch = data.sample_patches::<T>(&mut self.rng, self.cfg.batch_size, self.cfg.patch)?;
        let mut tape = Tape::new();
        let x = tape.constant(batch.input);
        let target = tape.constant(batch.target);
        let rec = net.record(&mut tape, x, Mode::Train)?;
        let loss_var = tape.mse_loss(rec.output, target)?;
        let loss = tape.value(loss_var).data()[0].as_f64();
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at iteration {}", self.iter)));
        }
        tape.backward(loss_var)?;
        let grads = net.gradients(&tape, &rec)?;
        let lr = self.schedule.lr_at(self.iter);
        let registry = net.registry();
        self.opt.step(
            &mut net.params_mut(),
            &grads,
            &registry,
            lr,
            self.cfg.weight_decay,
        )?;
        net.apply_batch_stats(&rec.batch_stats)?;
        self.iter += 1;
        Ok(loss)
    }
}

fn check_task<T: Real>(net: &Network<T>, data: &Dataset) -> Result<()> {
    match (net.spec().task, data.degradation()) {
        (Task::SuperResolution { factor }, Degradation::Bicubic { factor: f }) if f == factor => {
            Ok(())
        }
        (Task::Denoise, Degradation::Awgn { .. }) => Ok(()),
        (task, d) => Err(Error::invalid(format!(
            "{} network cannot train on {d:?} data",
            task.name()
        ))),
    }
}

/// Trains `net` on random patches of `data`. Deterministic given
/// `cfg.seed`. A non-finite loss ends training early with
/// [`StopReason::NonFinite`] and `net` at its last good state.
pub fn train<T: Real>(
    net: &mut Network<T>,
    data: &Dataset,
    cfg: &TrainConfig,
    validation: Option<Validation<'_>>,
    mut on_record: impl FnMut(&TrainRecord),
) -> Result<TrainReport> {
    check_task(net, data)?;
    let mut trainer = Trainer::new(net, *cfg)?;
    let schedule = *trainer.schedule();
    let validate = |net: &Network<T>| -> Result<Option<f64>> {
        match &validation {
            Some(v) => Ok(Some(
                eval_with(|x| net.forward(x), v.pairs, v.degradation)?.mean_psnr,
            )),
            None => Ok(None),
        }
    };

    let mut losses = Vec::with_capacity(cfg.max_iters);
    let mut records = Vec::new();
    let mut window = Vec::new();
    let mut stop = StopReason::MaxIters;
    while trainer.iteration() < cfg.max_iters {
        let iter = trainer.iteration();
        if schedule.should_stop(iter) {
            stop = StopReason::LrBelowThreshold;
            break;
        }
        let lr = schedule.lr_at(iter);
        let loss = match trainer.step(net, data) {
            Ok(l) => l,
            Err(Error::NonFinite(what)) => {
                stop = StopReason::NonFinite { iter, what };
                break;
            }
            Err(e) => return Err(e),
        };
        losses.push(loss);
        window.push(loss);
        let done = iter + 1;
        if done % cfg.log_every == 0 || done == cfg.max_iters {
            let val_psnr = if cfg.val_every > 0 && done % cfg.val_every == 0 {
                validate(net)?
            } else {
                None
            };
            let r = TrainRecord {
                iter: done,
                lr,
                loss: window.iter().sum::<f64>() / window.len() as f64,
                val_psnr,
            };
            window.clear();
            on_record(&r);
            records.push(r);
        }
    }
    let final_val_psnr = validate(net)?;
    Ok(TrainReport {
        records,
        iterations: losses.len(),
        losses,
        stop,
        final_val_psnr,
    })
}
