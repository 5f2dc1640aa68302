//! Local error estimators for the modified method.

use std::collections::VecDeque;

use super::{scaled_norm, ErrorEstimate, ToleranceSpec};
use crate::error::{Error, Result, Stage};
use crate::solvers::{modified_step_from, StageSolveConfig, EXPLICIT_COST};
use crate::system::{check_finite, evaluate, Block, EvalCounter, PartitionedSystem, SplitState};

/// Step size subdivisions used for Richardson estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subdivision {
    /// One step of `h` against two of `h/2`.
    Two,
    /// One step of `h` against three of `h/3`.
    Three,
}

impl Subdivision {
    pub fn substeps(self) -> usize {
        match self {
            Subdivision::Two => 2,
            Subdivision::Three => 3,
        }
    }
}

/// Power of `h` in the Richardson estimate (local error of a second order
/// method).
pub const RICHARDSON_ORDER: u32 = 3;
/// Power of `h` in the leading-term defect estimate.
pub const EMBEDDED_ORDER: u32 = 2;

/// Compares one step of size `h` with `m` substeps of size `h/m`.
///
/// Since the global error expands in powers of `h^2`, the error of the fine
/// solution is estimated by `err = (z_fine - z_coarse) / (m^2 - 1)`. With
/// `extrapolate` the step proceeds with `z_fine + err`.
///
/// `f0`, when given, is `f` at `state` and is not charged again.
#[allow(clippy::too_many_arguments)]
pub fn estimate_richardson(
    system: &dyn PartitionedSystem,
    state: &SplitState,
    h: f64,
    divisions: Subdivision,
    extrapolate: bool,
    tol: &ToleranceSpec,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<ErrorEstimate> {
    estimate_richardson_from(
        system,
        state,
        None,
        h,
        divisions,
        extrapolate,
        tol,
        cfg,
        counter,
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn estimate_richardson_from(
    system: &dyn PartitionedSystem,
    state: &SplitState,
    f0: Option<&[f64]>,
    h: f64,
    divisions: Subdivision,
    extrapolate: bool,
    tol: &ToleranceSpec,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<ErrorEstimate> {
    let f_start = match f0 {
        Some(f) => f.to_vec(),
        None => explicit_rhs(system, state, counter)?,
    };
    let coarse = modified_step_from(system, state, &f_start, h, cfg, counter)?;
    let m = divisions.substeps();
    let hs = h / m as f64;
    let mut fine = modified_step_from(system, state, &f_start, hs, cfg, counter)?;
    for k in 1..m {
        fine.t = state.t + k as f64 * hs;
        let f = explicit_rhs(system, &fine, counter)?;
        fine = modified_step_from(system, &fine, &f, hs, cfg, counter)?;
    }
    let t_new = state.t + h;
    let denom = (m * m - 1) as f64;
    let zc = coarse.stacked();
    let zf = fine.stacked();
    let err: Vec<f64> = zf.iter().zip(&zc).map(|(f, c)| (f - c) / denom).collect();
    let z_new: Vec<f64> = if extrapolate {
        zf.iter().zip(&err).map(|(f, e)| f + e).collect()
    } else {
        zf
    };
    let proposed = SplitState::from_stacked(t_new, &z_new, system.nx());
    let scaled = scaled_norm(&err, &z_new, tol);
    Ok(ErrorEstimate {
        err,
        scaled_norm: scaled,
        proposed,
        order: RICHARDSON_ORDER,
    })
}

pub(crate) fn explicit_rhs(
    system: &dyn PartitionedSystem,
    state: &SplitState,
    counter: &mut EvalCounter,
) -> Result<Vec<f64>> {
    let mut f = vec![0.0; system.nx()];
    system.eval_f(&state.x, &state.y, state.t, &mut f);
    counter.charge(EXPLICIT_COST);
    check_finite(&f, Block::X, state.t)
        .map_err(|e| Error::stage(Stage::ExplicitHalf, e.to_string()))?;
    Ok(f)
}

/// Right-hand side values stored at an accepted node.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub t: f64,
    pub z: Vec<f64>,
    /// `(f, g)` stacked.
    pub rhs: Vec<f64>,
}

impl Node {
    pub fn at(
        system: &dyn PartitionedSystem,
        state: &SplitState,
        counter: &mut EvalCounter,
    ) -> Result<Self> {
        let (f, g) = evaluate(system, state, counter)?;
        let mut rhs = f;
        rhs.extend_from_slice(&g);
        Ok(Node {
            t: state.t,
            z: state.stacked(),
            rhs,
        })
    }

    fn f(&self, nx: usize) -> &[f64] {
        &self.rhs[..nx]
    }
}

/// The last two accepted nodes, oldest first.
#[derive(Debug, Clone, Default)]
pub struct StepHistory {
    nodes: VecDeque<Node>,
}

impl StepHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, node: Node) {
        if self.nodes.len() == 2 {
            self.nodes.pop_front();
        }
        self.nodes.push_back(node);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn last(&self) -> Option<&Node> {
        self.nodes.back()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }
}

/// How `z'''` is approximated from stored data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThirdDerivativeRule {
    /// Twice the second divided difference of the right-hand side values at
    /// the last three nodes.
    DividedDifference,
    /// Third derivative of the cubic Hermite interpolant on the current
    /// interval. This vanishes identically for the x-block because the
    /// trapezoidal update matches the Hermite data exactly.
    HermiteInterval,
}

/// `z''' ~ 2 [F; t0, t1, t2]`
pub fn third_derivative_divided(t: [f64; 3], rhs: [&[f64]; 3]) -> Vec<f64> {
    let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
    let span = t[2] - t[0];
    (0..rhs[0].len())
        .map(|i| {
            let d0 = (rhs[1][i] - rhs[0][i]) / h0;
            let d1 = (rhs[2][i] - rhs[1][i]) / h1;
            2.0 * (d1 - d0) / span
        })
        .collect()
}

/// Third derivative of the cubic with values `z0, z1` and slopes `d0, d1`
/// at the ends of an interval of length `h`.
pub fn third_derivative_hermite(
    h: f64,
    z0: &[f64],
    z1: &[f64],
    d0: &[f64],
    d1: &[f64],
) -> Vec<f64> {
    (0..z0.len())
        .map(|i| 6.0 * ((d0[i] + d1[i]) / (h * h) - 2.0 * (z1[i] - z0[i]) / (h * h * h)))
        .collect()
}

/// Leading-term estimate `err = -(h^2 / 12) z'''` for the step from the last
/// node in `history` to `result`, using the simplified form for both blocks.
///
/// Returns the estimate together with the node at `result` (one function
/// evaluation). Errors with a precondition failure when the history is too
/// short for the chosen rule.
pub fn estimate_embedded(
    system: &dyn PartitionedSystem,
    history: &StepHistory,
    result: &SplitState,
    h: f64,
    rule: ThirdDerivativeRule,
    tol: &ToleranceSpec,
    counter: &mut EvalCounter,
) -> Result<(ErrorEstimate, Node)> {
    let needed = match rule {
        ThirdDerivativeRule::DividedDifference => 2,
        ThirdDerivativeRule::HermiteInterval => 1,
    };
    if history.len() < needed {
        return Err(Error::Precondition(format!(
            "embedded estimate needs {needed} stored nodes, have {}",
            history.len()
        )));
    }
    let node = Node::at(system, result, counter)?;
    let last = history.last().expect("checked length");
    let zppp = match rule {
        ThirdDerivativeRule::DividedDifference => {
            let prev = &history.nodes[0];
            third_derivative_divided([prev.t, last.t, node.t], [&prev.rhs, &last.rhs, &node.rhs])
        }
        ThirdDerivativeRule::HermiteInterval => {
            third_derivative_hermite(node.t - last.t, &last.z, &node.z, &last.rhs, &node.rhs)
        }
    };
    let err: Vec<f64> = zppp.iter().map(|d| -h * h / 12.0 * d).collect();
    let scaled = scaled_norm(&err, &node.z, tol);
    Ok((
        ErrorEstimate {
            err,
            scaled_norm: scaled,
            proposed: result.clone(),
            order: EMBEDDED_ORDER,
        },
        node,
    ))
}

/// Takes a modified step from the last node of `history` and estimates its
/// error with the leading-term formula, reusing the stored `f` as the
/// explicit stage. Falls back to Richardson `{1, 2}` without extrapolation
/// when the history is too short.
#[allow(clippy::too_many_arguments)]
pub(crate) fn embedded_step(
    system: &dyn PartitionedSystem,
    history: &StepHistory,
    state: &SplitState,
    h: f64,
    rule: ThirdDerivativeRule,
    force_richardson: bool,
    tol: &ToleranceSpec,
    cfg: &StageSolveConfig,
    counter: &mut EvalCounter,
) -> Result<(ErrorEstimate, Node)> {
    let nx = system.nx();
    let f0 = history.last().map(|n| n.f(nx).to_vec());
    let needed = match rule {
        ThirdDerivativeRule::DividedDifference => 2,
        ThirdDerivativeRule::HermiteInterval => 1,
    };
    if force_richardson || history.len() < needed {
        let est = estimate_richardson_from(
            system,
            state,
            f0.as_deref(),
            h,
            Subdivision::Two,
            false,
            tol,
            cfg,
            counter,
        )?;
        let node = Node::at(system, &est.proposed, counter)?;
        return Ok((est, node));
    }
    let f_start = f0.expect("history is non-empty");
    let result = modified_step_from(system, state, &f_start, h, cfg, counter)?;
    estimate_embedded(system, history, &result, h, rule, tol, counter)
}
