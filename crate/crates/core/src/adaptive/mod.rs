//! Adaptive integration with the modified method.
//!
//! Three variants share the same accept/reject loop and PI controller and
//! differ only in how the local error is estimated:
//!
//! * `modhines`: Richardson with subdivisions `{1, 2}`, no extrapolation.
//! * `modhext`: Richardson with `{1, 3}` and local extrapolation.
//! * `modhnew`: leading-term estimate `-(h^2/12) z'''` from stored
//!   right-hand sides, with the last evaluation reused as the next
//!   explicit stage.

mod controller;
mod estimate;

pub use controller::{
    controller_propose, ControllerConfig, ControllerState, StepDecision, RATIO_FLOOR,
};
pub use estimate::{
    estimate_embedded, estimate_richardson, third_derivative_divided, third_derivative_hermite,
    Node, StepHistory, Subdivision, ThirdDerivativeRule, EMBEDDED_ORDER, RICHARDSON_ORDER,
};

use crate::error::{Error, Result};
use crate::solvers::StageSolveConfig;
use crate::system::{check_dims, EvalCounter, PartitionedSystem, SplitState};
use estimate::{embedded_step, estimate_richardson_from, explicit_rhs};

/// Mixed tolerance `|err_i| <= rel_tol |z_i| + abs_tol_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSpec {
    pub rel_tol: f64,
    pub abs_tol: Vec<f64>,
}

impl ToleranceSpec {
    pub fn new(rel_tol: f64, abs_tol: Vec<f64>) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(Error::Precondition(format!(
                "relative tolerance must be positive, got {rel_tol}"
            )));
        }
        if let Some(a) = abs_tol.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Precondition(format!(
                "absolute tolerances must be positive, got {a}"
            )));
        }
        Ok(ToleranceSpec { rel_tol, abs_tol })
    }

    /// `abs_tol_i = typical_i * tol`.
    pub fn from_typical(tol: f64, typical: &[f64]) -> Result<Self> {
        Self::new(tol, typical.iter().map(|s| s * tol).collect())
    }
}

/// `max_i |err_i| / (rel_tol |z_i| + abs_tol_i)`.
pub fn scaled_norm(err: &[f64], z: &[f64], tol: &ToleranceSpec) -> f64 {
    err.iter()
        .zip(z)
        .zip(&tol.abs_tol)
        .map(|((e, z), a)| e.abs() / (tol.rel_tol * z.abs() + a))
        .fold(0.0, |m, r| {
            if r.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(r)
            }
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate {
    pub err: Vec<f64>,
    pub scaled_norm: f64,
    pub proposed: SplitState,
    /// Power of `h` in the estimate, used as the controller exponent.
    pub order: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdaptiveMethod {
    ModHines,
    ModHExt,
    ModHNew,
}

impl AdaptiveMethod {
    pub const ALL: [AdaptiveMethod; 3] = [
        AdaptiveMethod::ModHines,
        AdaptiveMethod::ModHExt,
        AdaptiveMethod::ModHNew,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdaptiveMethod::ModHines => "modhines",
            AdaptiveMethod::ModHExt => "modhext",
            AdaptiveMethod::ModHNew => "modhnew",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl std::fmt::Display for AdaptiveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOptions {
    pub stage: StageSolveConfig,
    pub controller: ControllerConfig,
    /// Initial step; `(t_end - t0) / 1000` when `None`.
    pub h0: Option<f64>,
    pub max_consecutive_rejections: usize,
    /// Accepted steps of `modhnew` that use the Richardson estimate.
    pub warmup_steps: usize,
    pub third_derivative: ThirdDerivativeRule,
    pub keep_trajectory: bool,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            stage: StageSolveConfig::default(),
            controller: ControllerConfig::default(),
            h0: None,
            max_consecutive_rejections: 50,
            warmup_steps: 2,
            third_derivative: ThirdDerivativeRule::DividedDifference,
            keep_trajectory: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: AdaptiveMethod,
    /// Accepted states including the initial one (only the endpoints unless
    /// `keep_trajectory`).
    pub samples: Vec<SplitState>,
    pub step_sizes: Vec<f64>,
    pub final_state: SplitState,
    pub counter: EvalCounter,
    pub max_accepted_norm: f64,
}

// Smallest step relative to the integration span.
const H_MIN_RELATIVE: f64 = 1e-14;

/// Integrates from `initial` to `t_end` with error control.
pub fn integrate_adaptive(
    system: &dyn PartitionedSystem,
    initial: &SplitState,
    t_end: f64,
    tol: &ToleranceSpec,
    method: AdaptiveMethod,
    opts: &AdaptiveOptions,
) -> Result<RunRecord> {
    check_dims(system, initial)?;
    opts.stage.validate()?;
    let t0 = initial.t;
    if !(t_end > t0) || !t_end.is_finite() {
        return Err(Error::Precondition(format!(
            "t_end = {t_end} must exceed t0 = {t0}"
        )));
    }
    let n = system.nx() + system.ny();
    if tol.abs_tol.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: tol.abs_tol.len(),
        });
    }
    let span = t_end - t0;
    let mut ccfg = opts.controller;
    ccfg.h_min = ccfg.h_min.max(H_MIN_RELATIVE * span);
    ccfg.h_max = ccfg.h_max.min(span);
    ccfg.validate()?;
    let h0 = opts.h0.unwrap_or(span / 1000.0);
    if !(h0 > 0.0) {
        return Err(Error::Precondition(format!(
            "initial step must be positive, got {h0}"
        )));
    }
    let order = match method {
        AdaptiveMethod::ModHNew if opts.warmup_steps == 0 => EMBEDDED_ORDER,
        _ => RICHARDSON_ORDER,
    };
    let mut ctrl = ControllerState::new(h0, order, ccfg);
    let mut counter = EvalCounter::new();
    let mut state = initial.clone();
    let mut samples = vec![initial.clone()];
    let mut step_sizes = Vec::new();
    let mut max_norm: f64 = 0.0;
    let mut consecutive = 0usize;

    // f at the current state, shared by rejected attempts.
    let mut f_cache: Option<Vec<f64>> = None;
    let mut history = StepHistory::new();
    if method == AdaptiveMethod::ModHNew {
        history.push(Node::at(system, &state, &mut counter)?);
    }

    while state.t < t_end {
        let remaining = t_end - state.t;
        let mut h = ctrl.h_current;
        let last = h >= remaining * (1.0 - 1e-10);
        if last {
            h = remaining;
        }
        ctrl.h_current = h;

        let attempt = match method {
            AdaptiveMethod::ModHines | AdaptiveMethod::ModHExt => {
                let (div, extrap) = if method == AdaptiveMethod::ModHines {
                    (Subdivision::Two, false)
                } else {
                    (Subdivision::Three, true)
                };
                let f0 = match f_cache.take() {
                    Some(f) => Ok(f),
                    None => explicit_rhs(system, &state, &mut counter),
                };
                f0.and_then(|f0| {
                    let est = estimate_richardson_from(
                        system,
                        &state,
                        Some(&f0),
                        h,
                        div,
                        extrap,
                        tol,
                        &opts.stage,
                        &mut counter,
                    );
                    f_cache = Some(f0);
                    est
                })
                .map(|e| (e, None))
            }
            AdaptiveMethod::ModHNew => {
                let warm = counter.steps_accepted < opts.warmup_steps as u64;
                embedded_step(
                    system,
                    &history,
                    &state,
                    h,
                    opts.third_derivative,
                    warm,
                    tol,
                    &opts.stage,
                    &mut counter,
                )
                .map(|(e, node)| (e, Some(node)))
            }
        };

        let outcome = match attempt {
            Ok((est, node)) if est.scaled_norm.is_finite() && est.proposed.is_finite() => {
                let d = controller_propose(&mut ctrl, &est, state.t)?;
                Some((d, est, node))
            }
            Ok(_) | Err(Error::StageFailure { .. }) | Err(Error::Evaluation { .. }) => None,
            Err(e) => return Err(e),
        };

        match outcome {
            Some((d, est, node)) if d.accept => {
                consecutive = 0;
                counter.steps_accepted += 1;
                max_norm = max_norm.max(est.scaled_norm);
                step_sizes.push(h);
                state = est.proposed;
                if last {
                    state.t = t_end;
                }
                f_cache = None;
                if let Some(mut node) = node {
                    node.t = state.t;
                    history.push(node);
                }
                if opts.keep_trajectory {
                    samples.push(state.clone());
                } else {
                    samples.truncate(1);
                }
            }
            other => {
                counter.steps_rejected += 1;
                consecutive += 1;
                if other.is_none() {
                    // Stage failure or non-finite proposal.
                    let h_next = 0.5 * h;
                    if h_next < ctrl.config.h_min {
                        return Err(Error::StepSizeUnderflow {
                            t: state.t,
                            h: h_next,
                        });
                    }
                    ctrl.h_current = h_next;
                }
                if consecutive > opts.max_consecutive_rejections {
                    return Err(Error::TooManyRejections {
                        t: state.t,
                        count: consecutive,
                    });
                }
            }
        }
    }

    if !opts.keep_trajectory {
        samples.push(state.clone());
    }
    Ok(RunRecord {
        method,
        samples,
        step_sizes,
        final_state: state,
        counter,
        max_accepted_norm: max_norm,
    })
}
