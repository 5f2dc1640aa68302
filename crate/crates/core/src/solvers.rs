//! Constant-step steppers: Hines' staggered method, its one-step
//! modification, and the implicit stages they share.
//!
//! One step of the modified method from `(x_n, y_n)` reads
//!
//! ```text
//! x_{n+1/2} = x_n + h/2 f(x_n, y_n, t_n)
//! y_{n+1}   = y_n + h g(x_{n+1/2}, (y_n + y_{n+1})/2, t_{n+1/2})
//! x_{n+1}   = x_{n+1/2} + h/2 f(x_{n+1}, y_{n+1}, t_{n+1})
//! ```
//!
//! With semilinear blocks both implicit stages are structured linear
//! solves. Without them a Newton iteration with a finite-difference Jacobian
//! is used.

use crate::error::{Error, Result, Stage};
use crate::linalg::lu_solve;
use crate::system::{check_dims, check_finite, Block, EvalCounter, PartitionedSystem, SplitState};

/// Charge of the explicit half step (one combined evaluation).
pub const EXPLICIT_COST: f64 = 1.0;
/// Charge of the midpoint stage of the modified method.
pub const MIDPOINT_COST: f64 = 1.0;
/// Charge of the trapezoidal stage of the modified method.
pub const TRAPEZOID_COST: f64 = 0.5;
/// Charge of each of the two stages of Hines' method.
pub const HINES_STAGE_COST: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSolveConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub use_semilinear_fastpath: bool,
}

impl Default for StageSolveConfig {
    fn default() -> Self {
        StageSolveConfig {
            newton_tol: 1e-12,
            newton_max_iter: 50,
            use_semilinear_fastpath: true,
        }
    }
}

impl StageSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::Precondition(
                "newton_tol must be > 0 and newton_max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Iterate of Hines' method: `x` at `t`, `y` at `t + h/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y_half: Vec<f64>,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `w = rhs + s F(w)` for the chosen block, where `F` is the block's
/// right-hand side with the other block frozen at `other`.
///
/// Returns `w` together with `F(w)`.
pub(crate) fn implicit_solve(
    system: &dyn PartitionedSystem,
    block: Block,
    other: &[f64],
    rhs: &[f64],
    t: f64,
    s: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
    stage: Stage,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rhs.len();
    if cfg.use_semilinear_fastpath {
        if let Some(lin) = system.linear_block(block) {
            let m = lin.matrix(other, t);
            let mut v = vec![0.0; n];
            lin.offset(other, t, &mut v);
            let r: Vec<f64> = rhs.iter().zip(&v).map(|(r, v)| r + s * v).collect();
            let w = m
                .solve_shifted(s, &r)
                .map_err(|e| Error::stage(stage, e.to_string()))?;
            check_finite(&w, block, t).map_err(|e| Error::stage(stage, e.to_string()))?;
            let mut fw = vec![0.0; n];
            m.mul_vec(&w, &mut fw);
            for (fi, vi) in fw.iter_mut().zip(&v) {
                *fi += vi;
            }
            return Ok((w, fw));
        }
    }
    newton_solve(system, block, other, rhs, t, s, cfg, counter, stage)
}

#[allow(clippy::too_many_arguments)]
fn newton_solve(
    system: &dyn PartitionedSystem,
    block: Block,
    other: &[f64],
    rhs: &[f64],
    t: f64,
    s: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
    stage: Stage,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rhs.len();
    let offset = match block {
        Block::X => 0,
        Block::Y => system.nx(),
    };
    let typical: Vec<f64> = system.typical_size()[offset..offset + n].to_vec();
    let mut w = rhs.to_vec();
    let mut fw = vec![0.0; n];
    let mut fp = vec![0.0; n];
    system.eval_block(block, &w, other, t, &mut fw);
    for _ in 0..cfg.newton_max_iter {
        let residual: Vec<f64> = (0..n).map(|i| w[i] - rhs[i] - s * fw[i]).collect();
        if !residual.iter().all(|r| r.is_finite()) {
            return Err(Error::stage(stage, "non-finite Newton residual"));
        }
        if max_norm(&residual) <= 0.5 * cfg.newton_tol * (1.0 + max_norm(&w)) {
            return Ok((w, fw));
        }
        counter.newton_iterations += 1;
        counter.jacobian_evals += 1;
        // J = I - s dF/dw by forward differences, column by column.
        let mut jac = vec![0.0; n * n];
        let mut wp = w.clone();
        for j in 0..n {
            let delta = f64::EPSILON.sqrt() * w[j].abs().max(typical[j]);
            wp[j] = w[j] + delta;
            system.eval_block(block, &wp, other, t, &mut fp);
            wp[j] = w[j];
            for i in 0..n {
                jac[i * n + j] = -s * (fp[i] - fw[i]) / delta;
            }
            jac[j * n + j] += 1.0;
        }
        let dw = lu_solve(n, jac, residual)
            .map_err(|e| Error::stage(stage, format!("Newton matrix: {e}")))?;
        for (wi, di) in w.iter_mut().zip(&dw) {
            *wi -= di;
        }
        system.eval_block(block, &w, other, t, &mut fw);
    }
    Err(Error::stage(
        stage,
        format!(
            "Newton did not converge in {} iterations",
            cfg.newton_max_iter
        ),
    ))
}

/// `z_new = z_n + h F((z_n + z_new)/2)` for one block.
#[allow(clippy::too_many_arguments)]
pub(crate) fn midpoint_block(
    system: &dyn PartitionedSystem,
    block: Block,
    other: &[f64],
    z_n: &[f64],
    t: f64,
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
    stage: Stage,
) -> Result<Vec<f64>> {
    let n = z_n.len();
    if cfg.use_semilinear_fastpath {
        if let Some(lin) = system.linear_block(block) {
            // (I - h/2 M) z_new = z_n + h v + h/2 M z_n
            let m = lin.matrix(other, t);
            let mut v = vec![0.0; n];
            lin.offset(other, t, &mut v);
            let mut mz = vec![0.0; n];
            m.mul_vec(z_n, &mut mz);
            let rhs: Vec<f64> = (0..n)
                .map(|i| z_n[i] + h * v[i] + 0.5 * h * mz[i])
                .collect();
            let z = m
                .solve_shifted(0.5 * h, &rhs)
                .map_err(|e| Error::stage(stage, e.to_string()))?;
            check_finite(&z, block, t).map_err(|e| Error::stage(stage, e.to_string()))?;
            return Ok(z);
        }
    }
    let (w, _) = newton_solve(system, block, other, z_n, t, 0.5 * h, cfg, counter, stage)?;
    Ok(w.iter().zip(z_n).map(|(w, z)| 2.0 * w - z).collect())
}

/// y-stage of the modified method:
/// `y_new = y_n + h g(x_half, (y_new + y_n)/2, t_half)`.
///
/// Charges one function evaluation.
pub fn solve_midpoint_stage(
    system: &dyn PartitionedSystem,
    x_half: &[f64],
    y_n: &[f64],
    t_half: f64,
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<Vec<f64>> {
    let y = midpoint_block(
        system,
        Block::Y,
        x_half,
        y_n,
        t_half,
        h,
        cfg,
        counter,
        Stage::Midpoint,
    )?;
    counter.charge(MIDPOINT_COST);
    Ok(y)
}

/// x-stage of the modified method:
/// `x_new = x_half + h/2 f(x_new, y_new, t_new)`.
///
/// Charges half a function evaluation.
pub fn solve_trapezoid_stage(
    system: &dyn PartitionedSystem,
    x_half: &[f64],
    y_new: &[f64],
    t_new: f64,
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<Vec<f64>> {
    let (x, _) = implicit_solve(
        system,
        Block::X,
        y_new,
        x_half,
        t_new,
        0.5 * h,
        cfg,
        counter,
        Stage::Trapezoid,
    )?;
    counter.charge(TRAPEZOID_COST);
    Ok(x)
}

fn check_step(h: f64, state: &SplitState) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Precondition(format!(
            "step size must be positive, got {h}"
        )));
    }
    if !state.is_finite() {
        return Err(Error::Precondition(
            "state contains non-finite entries".into(),
        ));
    }
    Ok(())
}

/// One step of the modified method.
pub fn modified_step(
    system: &dyn PartitionedSystem,
    state: &SplitState,
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<SplitState> {
    check_dims(system, state)?;
    check_step(h, state)?;
    let mut f0 = vec![0.0; system.nx()];
    system.eval_f(&state.x, &state.y, state.t, &mut f0);
    counter.charge(EXPLICIT_COST);
    check_finite(&f0, Block::X, state.t)
        .map_err(|e| Error::stage(Stage::ExplicitHalf, e.to_string()))?;
    modified_step_from(system, state, &f0, h, cfg, counter)
}

/// Modified step with `f(x_n, y_n, t_n)` supplied by the caller. Charges
/// only the two implicit stages.
pub(crate) fn modified_step_from(
    system: &dyn PartitionedSystem,
    state: &SplitState,
    f0: &[f64],
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<SplitState> {
    let x_half: Vec<f64> = state
        .x
        .iter()
        .zip(f0)
        .map(|(x, f)| x + 0.5 * h * f)
        .collect();
    let t_half = state.t + 0.5 * h;
    let t_new = state.t + h;
    let y_new = solve_midpoint_stage(system, &x_half, &state.y, t_half, h, cfg, counter)?;
    let x_new = solve_trapezoid_stage(system, &x_half, &y_new, t_new, h, cfg, counter)?;
    Ok(SplitState::new(t_new, x_new, y_new))
}

/// Computes `y` at `t0 + h/2` with local error `O(h^3)` by half a modified
/// step of size `h/2` (explicit x quarter step, then the midpoint stage).
///
/// The work is tallied in `counter.startup_fevals`, not `fevals`.
pub fn hines_bootstrap(
    system: &dyn PartitionedSystem,
    initial: &SplitState,
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<StaggeredState> {
    check_dims(system, initial)?;
    check_step(h, initial)?;
    let half = 0.5 * h;
    let mut f0 = vec![0.0; system.nx()];
    system.eval_f(&initial.x, &initial.y, initial.t, &mut f0);
    check_finite(&f0, Block::X, initial.t)
        .map_err(|e| Error::stage(Stage::Bootstrap, e.to_string()))?;
    let x_q: Vec<f64> = initial
        .x
        .iter()
        .zip(&f0)
        .map(|(x, f)| x + 0.5 * half * f)
        .collect();
    let y_half = midpoint_block(
        system,
        Block::Y,
        &x_q,
        &initial.y,
        initial.t + 0.5 * half,
        half,
        cfg,
        counter,
        Stage::Bootstrap,
    )?;
    counter.startup_fevals += EXPLICIT_COST + MIDPOINT_COST;
    Ok(StaggeredState {
        t: initial.t,
        x: initial.x.clone(),
        y_half,
    })
}

/// One step of Hines' staggered method:
///
/// ```text
/// x_{n+1}   = x_n + h f((x_n + x_{n+1})/2, y_{n+1/2}, t_{n+1/2})
/// y_{n+3/2} = y_{n+1/2} + h g(x_{n+1}, (y_{n+1/2} + y_{n+3/2})/2, t_{n+1})
/// ```
///
/// For semilinear blocks the x-stage is `A(y_{n+1/2})` applied to the
/// average of the two x values plus `b(y_{n+1/2}, t_{n+1/2})`.
pub fn hines_step(
    system: &dyn PartitionedSystem,
    stg: &StaggeredState,
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<StaggeredState> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Precondition(format!(
            "step size must be positive, got {h}"
        )));
    }
    if stg.x.len() != system.nx() || stg.y_half.len() != system.ny() {
        return Err(Error::Dimension {
            expected: system.nx() + system.ny(),
            got: stg.x.len() + stg.y_half.len(),
        });
    }
    let x_new = midpoint_block(
        system,
        Block::X,
        &stg.y_half,
        &stg.x,
        stg.t + 0.5 * h,
        h,
        cfg,
        counter,
        Stage::HinesX,
    )?;
    counter.charge(HINES_STAGE_COST);
    let t_new = stg.t + h;
    let y_next = midpoint_block(
        system,
        Block::Y,
        &x_new,
        &stg.y_half,
        t_new,
        h,
        cfg,
        counter,
        Stage::HinesY,
    )?;
    counter.charge(HINES_STAGE_COST);
    Ok(StaggeredState {
        t: t_new,
        x: x_new,
        y_half: y_next,
    })
}

/// Constant step size codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantMethod {
    /// Hines' staggered method.
    Hines,
    /// The modified one-step method.
    CmHines,
}

impl ConstantMethod {
    pub fn name(self) -> &'static str {
        match self {
            ConstantMethod::Hines => "hines",
            ConstantMethod::CmHines => "cmhines",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hines" => Some(ConstantMethod::Hines),
            "cmhines" => Some(ConstantMethod::CmHines),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstantRun {
    pub final_state: SplitState,
    pub counter: EvalCounter,
    pub samples: Vec<SplitState>,
}

/// Integrates with `n_steps` equal steps from `initial.t` to `t_end`.
///
/// For Hines' method the returned y at `t_end` is the average of the two
/// staggered values around it, which is second order accurate.
pub fn integrate_constant(
    system: &dyn PartitionedSystem,
    initial: &SplitState,
    t_end: f64,
    n_steps: usize,
    method: ConstantMethod,
    cfg: &StageSolveConfig,
    keep_samples: bool,
) -> Result<ConstantRun> {
    if n_steps == 0 || !(t_end > initial.t) {
        return Err(Error::Precondition(
            "need n_steps >= 1 and t_end > t0".into(),
        ));
    }
    cfg.validate()?;
    let t0 = initial.t;
    let h = (t_end - t0) / n_steps as f64;
    let mut counter = EvalCounter::new();
    let mut samples = Vec::new();
    if keep_samples {
        samples.push(initial.clone());
    }
    let final_state = match method {
        ConstantMethod::CmHines => {
            let mut state = initial.clone();
            for n in 0..n_steps {
                state = modified_step(system, &state, h, cfg, &mut counter)?;
                state.t = t0 + (n + 1) as f64 * h;
                counter.steps_accepted += 1;
                if keep_samples {
                    samples.push(state.clone());
                }
            }
            state.t = t_end;
            state
        }
        ConstantMethod::Hines => {
            let mut stg = hines_bootstrap(system, initial, h, cfg, &mut counter)?;
            let mut y_prev = stg.y_half.clone();
            for n in 0..n_steps {
                let mut next = hines_step(system, &stg, h, cfg, &mut counter)?;
                next.t = t0 + (n + 1) as f64 * h;
                y_prev = std::mem::replace(&mut stg, next).y_half;
                counter.steps_accepted += 1;
                if keep_samples {
                    let y_sync = average(&y_prev, &stg.y_half);
                    samples.push(SplitState::new(stg.t, stg.x.clone(), y_sync));
                }
            }
            SplitState::new(t_end, stg.x, average(&y_prev, &stg.y_half))
        }
    };
    Ok(ConstantRun {
        final_state,
        counter,
        samples,
    })
}

fn average(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| 0.5 * (a + b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{LinearSystem, ZeroSystem};

    #[test]
    fn null_dynamics_only_advance_time() {
        let sys = ZeroSystem::new(2, 1);
        let s = SplitState::new(1.0, vec![3.0, -1.0], vec![0.25]);
        let mut c = EvalCounter::new();
        let out = modified_step(&sys, &s, 0.7, &StageSolveConfig::default(), &mut c).unwrap();
        assert_eq!(out, SplitState::new(1.7, vec![3.0, -1.0], vec![0.25]));
        assert_eq!(c.fevals, 2.5);
    }

    #[test]
    fn decoupled_stiff_factors_vanish_at_h1() {
        // mu = lambda = -2, h = 1: trapezoid and midpoint factors are both 0
        let sys = LinearSystem::test_system(-2.0, -2.0, 0.0, 0.0);
        let s = SplitState::new(0.0, vec![1.0], vec![1.0]);
        let mut c = EvalCounter::new();
        let out = modified_step(&sys, &s, 1.0, &StageSolveConfig::default(), &mut c).unwrap();
        assert_eq!(out.x, vec![0.0]);
        assert_eq!(out.y, vec![0.0]);
    }

    #[test]
    fn scalar_midpoint_and_trapezoid_factors() {
        let (mu, lambda, h) = (-3.0, -0.5, 0.2);
        let sys = LinearSystem::test_system(mu, lambda, 0.0, 0.0);
        let cfg = StageSolveConfig::default();
        let mut c = EvalCounter::new();
        let beta = (1.0 + h * lambda / 2.0) / (1.0 - h * lambda / 2.0);
        let y = solve_midpoint_stage(&sys, &[0.0], &[2.0], 0.1, h, &cfg, &mut c).unwrap();
        assert!((y[0] - 2.0 * beta).abs() < 1e-15);
        let alpha = (1.0 + h * mu / 2.0) / (1.0 - h * mu / 2.0);
        let x_half = 1.0 + 0.5 * h * mu;
        let x = solve_trapezoid_stage(&sys, &[x_half], &[0.0], h, h, &cfg, &mut c).unwrap();
        assert!((x[0] - alpha).abs() < 1e-15);
        assert_eq!(c.fevals, 1.5);
    }

    #[test]
    fn forced_singular_trapezoid_stage() {
        // h * mu = 2
        let sys = LinearSystem::test_system(2.0, -1.0, 0.0, 0.0);
        let mut c = EvalCounter::new();
        let err = solve_trapezoid_stage(
            &sys,
            &[1.0],
            &[0.0],
            1.0,
            1.0,
            &StageSolveConfig::default(),
            &mut c,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::StageFailure {
                stage: Stage::Trapezoid,
                ..
            }
        ));
    }

    #[test]
    fn bootstrap_with_zero_g_keeps_y() {
        let sys = ZeroSystem::new(1, 2);
        let mut c = EvalCounter::new();
        let s = SplitState::new(0.0, vec![1.0], vec![0.3, 0.4]);
        let stg = hines_bootstrap(&sys, &s, 0.1, &StageSolveConfig::default(), &mut c).unwrap();
        assert_eq!(stg.y_half, vec![0.3, 0.4]);
        assert_eq!(c.fevals, 0.0);
        assert_eq!(c.startup_fevals, 2.0);
    }

    #[test]
    fn hines_zero_dynamics_is_identity() {
        let sys = ZeroSystem::new(1, 1);
        let mut c = EvalCounter::new();
        let stg = StaggeredState {
            t: 0.0,
            x: vec![1.0],
            y_half: vec![2.0],
        };
        let out = hines_step(&sys, &stg, 0.5, &StageSolveConfig::default(), &mut c).unwrap();
        assert_eq!(out.x, stg.x);
        assert_eq!(out.y_half, stg.y_half);
        assert_eq!(c.fevals, 2.0);
    }

    #[test]
    fn constant_run_accounting() {
        let sys = LinearSystem::test_system(-1.0, -2.0, 0.5, 0.3);
        let init = SplitState::new(0.0, vec![1.0], vec![1.0]);
        let cfg = StageSolveConfig::default();
        let r =
            integrate_constant(&sys, &init, 1.0, 100, ConstantMethod::Hines, &cfg, false).unwrap();
        assert_eq!(r.counter.fevals, 200.0);
        let r = integrate_constant(&sys, &init, 1.0, 100, ConstantMethod::CmHines, &cfg, false)
            .unwrap();
        assert_eq!(r.counter.fevals, 250.0);
        assert_eq!(r.final_state.t, 1.0);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let sys = ZeroSystem::new(1, 1);
        let mut c = EvalCounter::new();
        let s = SplitState::new(0.0, vec![0.0], vec![0.0]);
        assert!(modified_step(&sys, &s, 0.0, &StageSolveConfig::default(), &mut c).is_err());
    }
}
