//! Step learning-rate schedule: halve every `halve_every` iterations, stop
//! once the rate drops below `stop_below`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub lr_init: f64,
    pub halve_every: usize,
    pub stop_below: f64,
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_init > 0.0) || !(self.stop_below > 0.0) || self.halve_every == 0 {
            return Err(Error::invalid(
                "learning rates and halving interval must be positive",
            ));
        }
        if self.stop_below >= self.lr_init {
            return Err(Error::invalid(format!(
                "stop threshold {} must be below the initial rate {}",
                self.stop_below, self.lr_init
            )));
        }
        Ok(())
    }

    /// `lr_init * 2^-floor(iter / halve_every)`.
    pub fn lr_at(&self, iter: usize) -> f64 {
        let halvings = (iter / self.halve_every).min(i32::MAX as usize) as i32;
        self.lr_init * 0.5f64.powi(halvings)
    }

    pub fn should_stop(&self, iter: usize) -> bool {
        self.lr_at(iter) < self.stop_below
    }

    /// First iteration at which the stop rule fires.
    pub fn stop_iteration(&self) -> usize {
        let mut halvings = 0usize;
        while self.lr_init * 0.5f64.powi(halvings as i32) >= self.stop_below {
            halvings += 1;
        }
        halvings * self.halve_every
    }

    /// Halvings needed before the rate falls below `stop_below`.
    pub fn halvings_to_stop(lr_init: f64, stop_below: f64) -> usize {
        (lr_init / stop_below).log2().floor() as usize + 1
    }

    /// Spreads the halvings evenly over `max_iters`, so that the stop rule
    /// fires at about `max_iters`.
    pub fn scaled_to(max_iters: usize, lr_init: f64, stop_below: f64) -> Self {
        let halvings = Self::halvings_to_stop(lr_init, stop_below).max(1);
        LrSchedule {
            lr_init,
            halve_every: (max_iters / halvings).max(1),
            stop_below,
        }
    }
}

pub fn lr_at(iter: usize, schedule: &LrSchedule) -> f64 {
    schedule.lr_at(iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_like() -> LrSchedule {
        LrSchedule {
            lr_init: 1e-3,
            halve_every: 80_000,
            stop_below: 1e-5,
        }
    }

    #[test]
    fn halving_formula() {
        let s = paper_like();
        assert_eq!(s.lr_at(0), 1e-3);
        assert_eq!(s.lr_at(79_999), 1e-3);
        assert_eq!(s.lr_at(80_000), 5e-4);
        assert_eq!(s.lr_at(160_000), 2.5e-4);
    }

    #[test]
    fn stop_rule() {
        let s = paper_like();
        // 1e-3 / 2^7 = 7.8e-6 is the first rate below 1e-5
        assert_eq!(LrSchedule::halvings_to_stop(1e-3, 1e-5), 7);
        assert_eq!(s.stop_iteration(), 7 * 80_000);
        assert!(!s.should_stop(7 * 80_000 - 1));
        assert!(s.should_stop(7 * 80_000));
    }

    #[test]
    fn desk_scaling() {
        let s = LrSchedule::scaled_to(7000, 1e-3, 1e-5);
        assert_eq!(s.halve_every, 1000);
        assert_eq!(s.stop_iteration(), 7000);
    }

    #[test]
    fn invalid_schedules() {
        let mut s = paper_like();
        s.stop_below = 1e-2;
        assert!(s.validate().is_err());
        s.stop_below = 1e-5;
        s.halve_every = 0;
        assert!(s.validate().is_err());
    }
}
