//! Partitioned time stepping for Hodgkin-Huxley type systems.
//!
//! The crate implements Hines' staggered method, its one-step modification
//! (which admits step size control), the equivalent Peaceman-Rachford form,
//! closed-form stability analytics for the 2x2 partitioned test equation,
//! Richardson and embedded local error estimators with a PI controller,
//! and the two benchmark neuron models with a work-precision harness.
//!
//! Systems are split as
//!
//! ```text
//! x' = f(x, y, t) = A(y) x + b(y, t)
//! y' = g(x, y, t) = c(x, t) + D(x) y
//! ```
//!
//! and implicit stages reduce to structured linear solves for blocks that
//! are linear in their own variable. Other blocks fall back to Newton
//! iteration.

pub mod adaptive;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod solvers;
pub mod splitting;
pub mod stability;
pub mod system;

pub use adaptive::{
    integrate_adaptive, AdaptiveMethod, AdaptiveOptions, ControllerConfig, ControllerState,
    ErrorEstimate, RunRecord, ToleranceSpec,
};
pub use error::{Error, Result, Stage};
pub use linalg::{Structure, StructuredMatrix};
pub use models::{BlockAssignment, ModelKind, ModelSpec, Problem};
pub use solvers::{
    hines_bootstrap, hines_step, integrate_constant, modified_step, ConstantMethod,
    StageSolveConfig, StaggeredState,
};
pub use splitting::{pr_step, strang_linear_propagator};
pub use system::{
    consistency_check, evaluate, Block, EvalCounter, LinearBlock, LinearSystem, PartitionedSystem,
    SplitState, Swapped, ZeroSystem,
};
