//! Reference solutions, convergence studies and tolerance sweeps.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::adaptive::{integrate_adaptive, AdaptiveMethod, AdaptiveOptions, ToleranceSpec};
use crate::error::{Error, Result};
use crate::models::{BlockAssignment, ModelKind, ModelSpec};
use crate::solvers::{integrate_constant, ConstantMethod, StageSolveConfig};
use crate::system::{PartitionedSystem, SplitState};

/// `max_i |z_i - zr_i| / (|zr_i| + typical_i)`.
pub fn mixed_error_norm(z: &[f64], z_ref: &[f64], typical: &[f64]) -> f64 {
    assert_eq!(z.len(), z_ref.len(), "state dimensions differ");
    assert_eq!(z.len(), typical.len(), "typical size dimension differs");
    z.iter()
        .zip(z_ref)
        .zip(typical)
        .map(|((a, r), s)| (a - r).abs() / (r.abs() + s))
        .fold(0.0, |m, e| {
            if e.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(e)
            }
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    pub tol: f64,
    /// Steps of the coarser constant-step run; the finer one uses twice as
    /// many.
    pub constant_steps: usize,
    pub threshold: f64,
}

impl ReferenceOptions {
    /// Settings that certify both benchmark models.
    pub fn for_model(kind: ModelKind) -> Self {
        let constant_steps = match kind {
            ModelKind::Hh => 1 << 14,
            ModelKind::Sds => 1 << 20,
        };
        ReferenceOptions {
            tol: 1e-12,
            constant_steps,
            threshold: 1e-8,
        }
    }
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            tol: 1e-12,
            constant_steps: 1 << 12,
            threshold: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    /// Result of the adaptive extrapolated run.
    pub state: SplitState,
    /// Extrapolated constant step result.
    pub cross_check: SplitState,
    /// Mixed-norm distance between the two.
    pub certified_accuracy: f64,
}

/// Computes the state at `t_end` along two independent paths and certifies
/// their agreement:
///
/// * `modhext` at a tight tolerance,
/// * the modified method with `N` and `2N` constant steps, combined as
///   `z(h/2) + (z(h/2) - z(h)) / 3`.
///
/// Fails with [`Error::Reference`] when they differ by more than the
/// threshold in the mixed norm.
pub fn reference_solution(
    system: &dyn PartitionedSystem,
    initial: &SplitState,
    t_end: f64,
    opts: &ReferenceOptions,
) -> Result<Reference> {
    let typical = system.typical_size();
    let tol = ToleranceSpec::from_typical(opts.tol, &typical)?;
    let aopts = AdaptiveOptions {
        keep_trajectory: false,
        max_consecutive_rejections: 200,
        ..Default::default()
    };
    let adaptive = integrate_adaptive(
        system,
        initial,
        t_end,
        &tol,
        AdaptiveMethod::ModHExt,
        &aopts,
    )?;

    let cfg = StageSolveConfig::default();
    let n = opts.constant_steps;
    let coarse = integrate_constant(
        system,
        initial,
        t_end,
        n,
        ConstantMethod::CmHines,
        &cfg,
        false,
    )?;
    let fine = integrate_constant(
        system,
        initial,
        t_end,
        2 * n,
        ConstantMethod::CmHines,
        &cfg,
        false,
    )?;
    let zc = coarse.final_state.stacked();
    let zf = fine.final_state.stacked();
    let extrap: Vec<f64> = zf.iter().zip(&zc).map(|(f, c)| f + (f - c) / 3.0).collect();
    let cross_check = SplitState::from_stacked(t_end, &extrap, system.nx());

    let za = adaptive.final_state.stacked();
    let disagreement = mixed_error_norm(&za, &extrap, &typical);
    if !(disagreement <= opts.threshold) {
        return Err(Error::Reference {
            disagreement,
            threshold: opts.threshold,
        });
    }
    Ok(Reference {
        state: adaptive.final_state,
        cross_check,
        certified_accuracy: disagreement,
    })
}

/// Reference end state of a model in canonical order (voltages first).
pub fn model_reference(spec: &ModelSpec, opts: &ReferenceOptions) -> Result<(Vec<f64>, f64)> {
    let p = spec.build(BlockAssignment::VoltagesAsX);
    let r = reference_solution(p.system.as_ref(), &p.initial, p.t_end, opts)?;
    Ok((p.to_canonical(&r.state), r.certified_accuracy))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub steps: usize,
    pub fevals: f64,
    pub final_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub model: ModelKind,
    pub method: ConstantMethod,
    pub assignment: BlockAssignment,
    pub rows: Vec<ConvergenceRow>,
    pub slope: f64,
}

pub const CONVERGENCE_CSV_HEADER: &str = "model,method,assignment,h,steps,fevals,final_error,slope";

impl ConvergenceTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CONVERGENCE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                self.model.name(),
                self.method.name(),
                self.assignment.name(),
                r.h,
                r.steps,
                r.fevals,
                r.final_error,
                self.slope
            )?;
        }
        Ok(())
    }
}

/// Runs a constant step method with each step count and measures the end
/// point error against `reference` (canonical order).
pub fn convergence_study(
    spec: &ModelSpec,
    assignment: BlockAssignment,
    method: ConstantMethod,
    step_counts: &[usize],
    reference: &[f64],
) -> Result<ConvergenceTable> {
    if step_counts.len() < 2 || step_counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "need at least two increasing step counts".into(),
        ));
    }
    let p = spec.build(assignment);
    let typical = p.canonical_typical_size();
    let cfg = StageSolveConfig::default();
    let span = p.t_end - p.initial.t;
    let mut rows = Vec::with_capacity(step_counts.len());
    for &n in step_counts {
        let run = integrate_constant(
            p.system.as_ref(),
            &p.initial,
            p.t_end,
            n,
            method,
            &cfg,
            false,
        )?;
        let z = p.to_canonical(&run.final_state);
        rows.push(ConvergenceRow {
            h: span / n as f64,
            steps: n,
            fevals: run.counter.fevals,
            final_error: mixed_error_norm(&z, reference, &typical),
        });
    }
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.final_error).collect();
    Ok(ConvergenceTable {
        model: p.kind,
        method,
        assignment,
        slope: loglog_slope(&hs, &es),
        rows,
    })
}

/// `TOL_k = 10^(-2 - k/8)` for `k = 0..=48`.
pub fn tolerance_grid() -> Vec<f64> {
    (0..=48)
        .map(|k| 10f64.powf(-2.0 - k as f64 / 8.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub model: ModelSpec,
    pub assignment: BlockAssignment,
    pub methods: Vec<AdaptiveMethod>,
    pub tol_list: Vec<f64>,
}

impl SweepSpec {
    pub fn standard(
        model: ModelSpec,
        assignment: BlockAssignment,
        methods: Vec<AdaptiveMethod>,
    ) -> Self {
        SweepSpec {
            model,
            assignment,
            methods,
            tol_list: tolerance_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tol_list.iter().any(|t| !(*t > 0.0))
            || self.tol_list.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Precondition(
                "tolerances must be positive and strictly decreasing".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Precondition("no methods given".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkPrecisionPoint {
    pub model: ModelKind,
    pub method: AdaptiveMethod,
    pub assignment: BlockAssignment,
    /// Index into the tolerance list.
    pub k: usize,
    pub tol: f64,
    pub fevals: f64,
    pub jacevals: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub final_error: f64,
    pub failed: bool,
}

/// One adaptive run measured against a canonical reference state.
pub fn run_point(
    spec: &ModelSpec,
    assignment: BlockAssignment,
    method: AdaptiveMethod,
    k: usize,
    tol: f64,
    reference: &[f64],
) -> WorkPrecisionPoint {
    let p = spec.build(assignment);
    let mut point = WorkPrecisionPoint {
        model: p.kind,
        method,
        assignment,
        k,
        tol,
        fevals: 0.0,
        jacevals: 0,
        accepted: 0,
        rejected: 0,
        final_error: f64::NAN,
        failed: true,
    };
    let opts = AdaptiveOptions {
        keep_trajectory: false,
        ..Default::default()
    };
    let run = ToleranceSpec::from_typical(tol, &p.system.typical_size()).and_then(|t| {
        integrate_adaptive(p.system.as_ref(), &p.initial, p.t_end, &t, method, &opts)
    });
    if let Ok(run) = run {
        let z = p.to_canonical(&run.final_state);
        point.fevals = run.counter.fevals;
        point.jacevals = run.counter.jacobian_evals;
        point.accepted = run.counter.steps_accepted;
        point.rejected = run.counter.steps_rejected;
        point.final_error = mixed_error_norm(&z, reference, &p.canonical_typical_size());
        point.failed = !point.final_error.is_finite();
    }
    point
}

/// Runs every `(method, tol)` pair on `threads` worker threads. The result
/// is ordered by method, then tolerance index, independent of scheduling.
pub fn run_sweep(
    spec: &SweepSpec,
    reference: &[f64],
    threads: usize,
) -> Result<Vec<WorkPrecisionPoint>> {
    spec.validate()?;
    let jobs: Vec<(AdaptiveMethod, usize, f64)> = spec
        .methods
        .iter()
        .flat_map(|&m| {
            spec.tol_list
                .iter()
                .enumerate()
                .map(move |(k, &t)| (m, k, t))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    let mut points: Vec<WorkPrecisionPoint> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, k, t)| run_point(&spec.model, spec.assignment, m, k, t, reference))
            .collect()
    });
    points.sort_by_key(|p| (p.method, p.k));
    Ok(points)
}

/// Worker count from `PARTHINES_THREADS`, default 1.
pub fn threads_from_env() -> usize {
    std::env::var("PARTHINES_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

pub const SWEEP_CSV_HEADER: &str =
    "model,method,assignment,tol,fevals,jacevals,accepted,rejected,final_error,failed";

pub fn write_sweep_csv<W: Write>(points: &[WorkPrecisionPoint], mut w: W) -> io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{:.16e},{:.16e},{},{},{},{:.16e},{}",
            p.model.name(),
            p.method.name(),
            p.assignment.name(),
            p.tol,
            p.fevals,
            p.jacevals,
            p.accepted,
            p.rejected,
            p.final_error,
            p.failed
        )?;
    }
    Ok(())
}
