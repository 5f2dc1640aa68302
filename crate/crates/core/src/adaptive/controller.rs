//! PI step size controller.
//!
//! The proposal follows the PI.4.2 digital filter
//!
//! ```text
//! h_{n+1} = h_n (safety / r_n)^{b1} (safety / r_{n-1})^{b2},
//! (k b1, k b2) = (3/5, -1/5)
//! ```
//!
//! where `r` is the scaled error norm and `k` the power of `h` in the error
//! estimate.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub safety: f64,
    /// `k * b1`
    pub k_beta1: f64,
    /// `k * b2`
    pub k_beta2: f64,
    pub growth_max: f64,
    pub shrink_min: f64,
    /// Upper bound of the step reduction factor after a rejection.
    pub reject_factor: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            safety: 0.9,
            k_beta1: 0.6,
            k_beta2: -0.2,
            growth_max: 3.0,
            shrink_min: 0.2,
            reject_factor: 0.5,
            h_min: 0.0,
            h_max: f64::INFINITY,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.safety > 0.0
            && self.shrink_min > 0.0
            && self.shrink_min < 1.0
            && self.growth_max > 1.0
            && self.reject_factor > 0.0
            && self.reject_factor < 1.0
            && self.h_min >= 0.0
            && self.h_max > self.h_min;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "invalid controller limits: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    pub accept: bool,
    pub h_next: f64,
}

/// Floor applied to error ratios. A near-exact step would otherwise leave a
/// tiny ratio in the memory term and collapse the following step.
pub const RATIO_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub prev_error_ratio: f64,
    pub h_current: f64,
    pub order_k: u32,
    pub config: ControllerConfig,
}

impl ControllerState {
    pub fn new(h0: f64, order_k: u32, config: ControllerConfig) -> Self {
        ControllerState {
            prev_error_ratio: 1.0,
            h_current: h0.clamp(config.h_min, config.h_max),
            order_k,
            config,
        }
    }

    /// Unclamped factor `(safety / r)^{b1} (safety / r_prev)^{b2}`.
    pub fn raw_factor(&self, scaled_norm: f64) -> f64 {
        let k = f64::from(self.order_k);
        let b1 = self.config.k_beta1 / k;
        let b2 = self.config.k_beta2 / k;
        let s = self.config.safety;
        (s / scaled_norm.max(RATIO_FLOOR)).powf(b1)
            * (s / self.prev_error_ratio.max(RATIO_FLOOR)).powf(b2)
    }

    /// Accept/reject decision and next step size for the error ratio of a
    /// step of size `h_current` taken from time `t`. Updates the controller
    /// memory.
    pub fn propose(&mut self, scaled_norm: f64, t: f64) -> Result<StepDecision> {
        if !scaled_norm.is_finite() || scaled_norm < 0.0 {
            return Err(Error::Precondition(format!(
                "error ratio must be finite, got {scaled_norm}"
            )));
        }
        let c = &self.config;
        let rho = self.raw_factor(scaled_norm);
        let h = self.h_current;
        let accept = scaled_norm <= 1.0;
        let h_next = if accept {
            (h * rho.clamp(c.shrink_min, c.growth_max)).min(c.h_max)
        } else {
            h * rho.min(c.reject_factor).max(c.shrink_min)
        };
        if h_next < c.h_min {
            return Err(Error::StepSizeUnderflow { t, h: h_next });
        }
        if accept {
            self.prev_error_ratio = scaled_norm.max(RATIO_FLOOR);
        }
        self.h_current = h_next;
        Ok(StepDecision { accept, h_next })
    }
}

/// Feeds the estimate of a step starting at `t` to the controller.
pub fn controller_propose(
    ctrl: &mut ControllerState,
    estimate: &super::ErrorEstimate,
    t: f64,
) -> Result<StepDecision> {
    ctrl.order_k = estimate.order;
    ctrl.propose(estimate.scaled_norm, t)
}
