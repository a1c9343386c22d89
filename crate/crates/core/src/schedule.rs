//! Batch-size policies.
//!
//! All rules apply `⌈·⌉` once at the end and clamp to `[1, n]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerParams {
    pub c_tau: f64,
    pub c_eps: f64,
    pub epsilon: f64,
    pub sigma2: f64,
    pub n: usize,
    /// `τ₀` (SPIDER) or `τ₁` (SVRG).
    pub tau_init: f64,
}

impl SchedulerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_tau > 0.0 && self.c_eps > 0.0 && self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "c_tau, c_eps, epsilon must be positive: {self:?}"
            )));
        }
        if !(self.sigma2 >= 0.0) || !(self.tau_init >= 0.0) || self.n == 0 {
            return Err(Error::InvalidInput(format!(
                "sigma2, tau_init must be nonnegative and n >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    /// `c_ε σ² / ε`, the accuracy-driven cap.
    pub fn accuracy_cap(&self) -> f64 {
        self.c_eps * self.sigma2 / self.epsilon
    }
}

fn finalize(m: f64, n: usize) -> usize {
    let capped = m.min(n as f64);
    (capped.ceil() as usize).clamp(1, n)
}

/// `c_τ σ² / diff`, treated as `+∞` when `diff = 0`.
fn adaptive_term(sp: &SchedulerParams, diff: f64) -> f64 {
    if diff > 0.0 {
        sp.c_tau * sp.sigma2 / diff
    } else {
        f64::INFINITY
    }
}

/// `⌈min(c_ε σ²/ε, n)⌉`, at least 1.
pub fn static_batch(sp: &SchedulerParams) -> usize {
    finalize(sp.accuracy_cap(), sp.n)
}

/// Adaptive SADMM batch from `‖x_k - x_{k-1}‖²`.
pub fn abs_sadmm_batch(sp: &SchedulerParams, prev_diff_sq: f64) -> usize {
    finalize(adaptive_term(sp, prev_diff_sq).min(sp.accuracy_cap()), sp.n)
}

/// Adaptive anchor batch for the variance-reduced methods from the averaged
/// squared step length `τ` of the previous epoch.
pub fn abs_vr_batch(sp: &SchedulerParams, tau: f64) -> usize {
    finalize(adaptive_term(sp, tau).min(sp.accuracy_cap()), sp.n)
}

/// Running `Σ ‖x_{t+1} - x_t‖² / divisor` over an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauAccumulator {
    pub running_sum: f64,
    pub divisor: usize,
    /// τ to use at the next anchor decision.
    pub value_for_next_epoch: f64,
    steps: usize,
}

impl TauAccumulator {
    pub fn new(divisor: usize, tau_init: f64) -> Self {
        assert!(divisor >= 1, "tau divisor must be >= 1");
        Self {
            running_sum: 0.0,
            divisor,
            value_for_next_epoch: tau_init,
            steps: 0,
        }
    }

    /// Adds one step; closes the epoch after `divisor` steps.
    pub fn tau_update(&mut self, step_diff_sq: f64) {
        debug_assert!(step_diff_sq >= 0.0);
        self.running_sum += step_diff_sq / self.divisor as f64;
        self.steps += 1;
        if self.steps == self.divisor {
            self.close_epoch();
        }
    }

    /// Publishes the running sum as the next τ and resets it.
    pub fn close_epoch(&mut self) {
        self.value_for_next_epoch = self.running_sum;
        self.running_sum = 0.0;
        self.steps = 0;
    }

    /// Discards a partial epoch without publishing it.
    pub fn reset(&mut self) {
        self.running_sum = 0.0;
        self.steps = 0;
    }
}
