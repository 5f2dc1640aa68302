//! Benchmark neuron models and their block assignments.

pub mod config;
pub mod hh;
pub mod sds;

pub use config::{parse_config, write_config};
pub use hh::{HHParams, HodgkinHuxley};
pub use sds::{GateSign, SDSParams, SomaDendriteSpine};

use crate::system::{PartitionedSystem, SplitState, Swapped};

/// `x / (e^x - 1)`, continuous through the removable singularity at 0.
pub fn psi(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x / 2.0 + x * x / 12.0
    } else if x > 700.0 {
        // e^x overflows; x e^{-x} is the exact limit form
        x * (-x).exp()
    } else {
        x / x.exp_m1()
    }
}

/// Which physical variables form the x-block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockAssignment {
    VoltagesAsX,
    GatesAsX,
}

impl BlockAssignment {
    pub const ALL: [BlockAssignment; 2] = [BlockAssignment::VoltagesAsX, BlockAssignment::GatesAsX];

    pub fn name(self) -> &'static str {
        match self {
            BlockAssignment::VoltagesAsX => "voltages",
            BlockAssignment::GatesAsX => "gates",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Hh,
    Sds,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Hh => "hh",
            ModelKind::Sds => "sds",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hh" => Some(ModelKind::Hh),
            "sds" => Some(ModelKind::Sds),
            _ => None,
        }
    }

    /// Number of membrane voltages in the state.
    pub fn n_voltages(self) -> usize {
        match self {
            ModelKind::Hh => 1,
            ModelKind::Sds => 3,
        }
    }
}

/// Parameters, initial values and end time of one model run. Initial values
/// are in canonical order (voltages first).
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Hh {
        params: HHParams,
        initial: [f64; 4],
        t_end: f64,
    },
    Sds {
        params: SDSParams,
        initial: [f64; 9],
        t_end: f64,
    },
}

impl ModelSpec {
    pub fn standard(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Hh => ModelSpec::Hh {
                params: HHParams::default(),
                initial: hh::DEFAULT_INITIAL,
                t_end: hh::DEFAULT_T_END,
            },
            ModelKind::Sds => ModelSpec::Sds {
                params: SDSParams::default(),
                initial: sds::DEFAULT_INITIAL,
                t_end: sds::DEFAULT_T_END,
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Hh { .. } => ModelKind::Hh,
            ModelSpec::Sds { .. } => ModelKind::Sds,
        }
    }

    pub fn initial(&self) -> &[f64] {
        match self {
            ModelSpec::Hh { initial, .. } => initial,
            ModelSpec::Sds { initial, .. } => initial,
        }
    }

    pub fn t_end(&self) -> f64 {
        match *self {
            ModelSpec::Hh { t_end, .. } | ModelSpec::Sds { t_end, .. } => t_end,
        }
    }

    pub fn build(&self, assignment: BlockAssignment) -> Problem {
        let base: Box<dyn PartitionedSystem> = match self {
            ModelSpec::Hh { params, .. } => Box::new(HodgkinHuxley::new(*params)),
            ModelSpec::Sds { params, .. } => Box::new(SomaDendriteSpine::new(*params)),
        };
        let system: Box<dyn PartitionedSystem> = match assignment {
            BlockAssignment::VoltagesAsX => base,
            BlockAssignment::GatesAsX => Box::new(Swapped::new(base)),
        };
        let kind = self.kind();
        let mut p = Problem {
            kind,
            assignment,
            system,
            initial: SplitState::new(0.0, vec![], vec![]),
            t_end: self.t_end(),
        };
        p.initial = p.from_canonical(0.0, self.initial());
        p
    }
}

/// Published initial state (voltages as x) and end time.
pub fn paper_initial_conditions(kind: ModelKind) -> (SplitState, f64) {
    let spec = ModelSpec::standard(kind);
    let nv = kind.n_voltages();
    (
        SplitState::from_stacked(0.0, spec.initial(), nv),
        spec.t_end(),
    )
}

/// A model built for one block assignment.
pub struct Problem {
    pub kind: ModelKind,
    pub assignment: BlockAssignment,
    pub system: Box<dyn PartitionedSystem>,
    pub initial: SplitState,
    pub t_end: f64,
}

impl Problem {
    /// Stacked state in canonical order (voltages first).
    pub fn to_canonical(&self, state: &SplitState) -> Vec<f64> {
        let mut z = state.stacked();
        if self.assignment == BlockAssignment::GatesAsX {
            z.rotate_right(self.kind.n_voltages());
        }
        z
    }

    pub fn from_canonical(&self, t: f64, z: &[f64]) -> SplitState {
        let nv = self.kind.n_voltages();
        match self.assignment {
            BlockAssignment::VoltagesAsX => SplitState::from_stacked(t, z, nv),
            BlockAssignment::GatesAsX => SplitState::new(t, z[nv..].to_vec(), z[..nv].to_vec()),
        }
    }

    /// Typical sizes in canonical order.
    pub fn canonical_typical_size(&self) -> Vec<f64> {
        let ts = self.system.typical_size();
        let state = SplitState::from_stacked(0.0, &ts, self.system.nx());
        self.to_canonical(&state)
    }
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("kind", &self.kind)
            .field("assignment", &self.assignment)
            .field("system", &self.system.name())
            .field("initial", &self.initial)
            .field("t_end", &self.t_end)
            .finish()
    }
}
