//! Peaceman-Rachford stepping for the `(f, 0) + (0, g)` decomposition and
//! the closed-form Strang propagator of the linear test equation.

use crate::error::{Error, Result, Stage};
use crate::solvers::{
    implicit_solve, StageSolveConfig, EXPLICIT_COST, MIDPOINT_COST, TRAPEZOID_COST,
};
use crate::stability::{Mat2, TestSystemParams};
use crate::system::{check_dims, check_finite, Block, EvalCounter, PartitionedSystem, SplitState};

/// Intermediate values `U_{n+1/2}` of a Peaceman-Rachford step.
#[derive(Debug, Clone, PartialEq)]
pub struct PRStageValues {
    pub x_half: Vec<f64>,
    pub y_half: Vec<f64>,
}

/// One Peaceman-Rachford step:
///
/// ```text
/// (i)   x_{n+1/2} = x_n + h/2 f(x_n, y_n, t_n)
/// (ii)  y_{n+1/2} = y_n + h/2 g(x_{n+1/2}, y_{n+1/2}, t_{n+1/2})
/// (iii) y_{n+1}   = y_{n+1/2} + h/2 g(x_{n+1/2}, y_{n+1/2}, t_{n+1/2})
/// (iv)  x_{n+1}   = x_{n+1/2} + h/2 f(x_{n+1}, y_{n+1}, t_{n+1})
/// ```
///
/// Step (iii) reuses the stage value of (ii). Charged like the modified
/// method.
pub fn pr_step(
    system: &dyn PartitionedSystem,
    state: &SplitState,
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<SplitState> {
    pr_step_with_stages(system, state, h, cfg, counter).map(|(s, _)| s)
}

pub fn pr_step_with_stages(
    system: &dyn PartitionedSystem,
    state: &SplitState,
    h: f64,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<(SplitState, PRStageValues)> {
    check_dims(system, state)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Precondition(format!(
            "step size must be positive, got {h}"
        )));
    }
    let half = 0.5 * h;
    let t_half = state.t + half;
    let t_new = state.t + h;

    let mut f0 = vec![0.0; system.nx()];
    system.eval_f(&state.x, &state.y, state.t, &mut f0);
    counter.charge(EXPLICIT_COST);
    check_finite(&f0, Block::X, state.t)
        .map_err(|e| Error::stage(Stage::ExplicitHalf, e.to_string()))?;
    let x_half: Vec<f64> = state.x.iter().zip(&f0).map(|(x, f)| x + half * f).collect();

    let (y_half, g_half) = implicit_solve(
        system,
        Block::Y,
        &x_half,
        &state.y,
        t_half,
        half,
        cfg,
        counter,
        Stage::SplitY,
    )?;
    counter.charge(MIDPOINT_COST);

    let y_new: Vec<f64> = y_half
        .iter()
        .zip(&g_half)
        .map(|(y, g)| y + half * g)
        .collect();

    let (x_new, _) = implicit_solve(
        system,
        Block::X,
        &y_new,
        &x_half,
        t_new,
        half,
        cfg,
        counter,
        Stage::SplitX,
    )?;
    counter.charge(TRAPEZOID_COST);

    Ok((
        SplitState::new(t_new, x_new, y_new),
        PRStageValues { x_half, y_half },
    ))
}

/// Exact one-step propagator of Strang splitting applied to
/// `x' = mu x + a y, y' = b x + lambda y`: half step of the exact x-flow,
/// full step of the exact y-flow, half step of the exact x-flow.
///
/// With `alpha = exp(mu h)`, `beta = exp(lambda h)` and
/// `T = gamma (sqrt(alpha) - 1)(beta - 1)`:
///
/// ```text
/// C = [ alpha + sqrt(alpha) T      a/mu (sqrt(alpha) - 1)(sqrt(alpha) + T + beta) ]
///     [ b/lambda sqrt(alpha)(beta - 1)                 T + beta                   ]
/// ```
pub fn strang_linear_propagator(params: &TestSystemParams, h: f64) -> Result<Mat2> {
    let TestSystemParams { mu, lambda, a, b } = *params;
    if mu == 0.0 || lambda == 0.0 {
        return Err(Error::Domain(
            "Strang propagator needs mu != 0 and lambda != 0".into(),
        ));
    }
    if !(h > 0.0) {
        return Err(Error::Precondition(format!(
            "step size must be positive, got {h}"
        )));
    }
    let sqrt_alpha = (0.5 * mu * h).exp();
    let alpha = sqrt_alpha * sqrt_alpha;
    let beta = (lambda * h).exp();
    let gamma = params.gamma();
    let t = gamma * (sqrt_alpha - 1.0) * (beta - 1.0);
    Ok([
        [
            alpha + sqrt_alpha * t,
            a / mu * (sqrt_alpha - 1.0) * (sqrt_alpha + t + beta),
        ],
        [b / lambda * sqrt_alpha * (beta - 1.0), t + beta],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::ZeroSystem;

    #[test]
    fn pr_zero_dynamics_is_identity() {
        let sys = ZeroSystem::new(2, 2);
        let s = SplitState::new(0.0, vec![1.0, 2.0], vec![3.0, 4.0]);
        let mut c = EvalCounter::new();
        let out = pr_step(&sys, &s, 0.3, &StageSolveConfig::default(), &mut c).unwrap();
        assert_eq!(out.x, s.x);
        assert_eq!(out.y, s.y);
        assert_eq!(out.t, 0.3);
    }

    #[test]
    fn strang_decoupled_is_exact_flow() {
        let p = TestSystemParams::new(-1.3, -0.4, 0.0, 0.0);
        let c = strang_linear_propagator(&p, 0.7).unwrap();
        assert!((c[0][0] - (-1.3f64 * 0.7).exp()).abs() < 1e-15);
        assert!((c[1][1] - (-0.4f64 * 0.7).exp()).abs() < 1e-15);
        assert_eq!(c[0][1], 0.0);
        assert_eq!(c[1][0], 0.0);
    }

    #[test]
    fn strang_rejects_zero_rates() {
        let p = TestSystemParams::new(0.0, -1.0, 1.0, 1.0);
        assert!(matches!(
            strang_linear_propagator(&p, 1.0),
            Err(Error::Domain(_))
        ));
    }
}
