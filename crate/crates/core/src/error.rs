use std::fmt;

use thiserror::Error;

use crate::system::Block;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Identifies which sub-step of a method failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Explicit Euler half step of the x-block.
    ExplicitHalf,
    /// Implicit midpoint stage of the y-block.
    Midpoint,
    /// Implicit trapezoidal stage of the x-block.
    Trapezoid,
    /// Start-up stage producing y at t0 + h/2 for the staggered method.
    Bootstrap,
    /// x-block stage of the staggered method.
    HinesX,
    /// y-block stage of the staggered method.
    HinesY,
    /// Implicit y half step of Peaceman-Rachford.
    SplitY,
    /// Implicit x half step of Peaceman-Rachford.
    SplitX,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::ExplicitHalf => "explicit-half",
            Stage::Midpoint => "midpoint",
            Stage::Trapezoid => "trapezoid",
            Stage::Bootstrap => "bootstrap",
            Stage::HinesX => "hines-x",
            Stage::HinesY => "hines-y",
            Stage::SplitY => "split-y",
            Stage::SplitX => "split-x",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite {block} component {index} at t = {t}")]
    Evaluation { block: Block, index: usize, t: f64 },

    #[error("stage {stage} failed: {reason}")]
    StageFailure { stage: Stage, reason: String },

    #[error("step size underflow at t = {t} (proposed h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("{count} consecutive rejected steps at t = {t}")]
    TooManyRejections { t: f64, count: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("reference paths disagree by {disagreement:e} (threshold {threshold:e})")]
    Reference { disagreement: f64, threshold: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

impl Error {
    pub(crate) fn stage(stage: Stage, reason: impl Into<String>) -> Self {
        Error::StageFailure {
            stage,
            reason: reason.into(),
        }
    }
}
