//! Classical Hodgkin-Huxley space-clamped axon (1952 sign convention).
//!
//! State: `x = [V]`, `y = [m, n, h]`.

use super::psi;
use crate::linalg::StructuredMatrix;
use crate::system::{Block, LinearBlock, PartitionedSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HHParams {
    pub c: f64,
    pub i: f64,
    pub g_k: f64,
    pub g_na: f64,
    pub g_l: f64,
    pub v_k: f64,
    pub v_na: f64,
    pub v_l: f64,
}

impl Default for HHParams {
    fn default() -> Self {
        HHParams {
            c: 1.0,
            i: 14.2,
            g_k: 36.0,
            g_na: 120.0,
            g_l: 0.3,
            v_k: 12.0,
            v_na: -115.0,
            v_l: -10.599,
        }
    }
}

/// Opening and closing rates at one voltage, ordered `(m, n, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HHRates {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

pub fn alpha_n(v: f64) -> f64 {
    0.1 * psi(0.1 * (v + 10.0))
}
pub fn beta_n(v: f64) -> f64 {
    0.125 * (v / 80.0).exp()
}
pub fn alpha_m(v: f64) -> f64 {
    psi(0.1 * (v + 25.0))
}
pub fn beta_m(v: f64) -> f64 {
    4.0 * (v / 18.0).exp()
}
pub fn alpha_h(v: f64) -> f64 {
    0.07 * (0.05 * v).exp()
}
pub fn beta_h(v: f64) -> f64 {
    1.0 / (1.0 + (0.1 * (v + 30.0)).exp())
}

impl HHRates {
    pub fn at(v: f64) -> Self {
        HHRates {
            alpha: [alpha_m(v), alpha_n(v), alpha_h(v)],
            beta: [beta_m(v), beta_n(v), beta_h(v)],
        }
    }
}

/// Initial state `(V, m, n, h)` and end time of the classical experiment.
pub const DEFAULT_INITIAL: [f64; 4] = [-4.5, 0.085, 0.5, 0.38];
pub const DEFAULT_T_END: f64 = 20.0;

#[derive(Debug, Clone)]
struct Voltage(HHParams);

impl Voltage {
    // (n^4 g_K, m^3 h g_Na)
    fn conductances(&self, y: &[f64]) -> (f64, f64) {
        let (m, n, h) = (y[0], y[1], y[2]);
        (self.0.g_k * n.powi(4), self.0.g_na * m.powi(3) * h)
    }
}

impl LinearBlock for Voltage {
    fn matrix(&self, y: &[f64], _t: f64) -> StructuredMatrix {
        let (gk, gna) = self.conductances(y);
        StructuredMatrix::Diagonal(vec![-(gk + gna + self.0.g_l) / self.0.c])
    }

    fn offset(&self, y: &[f64], _t: f64, out: &mut [f64]) {
        let p = &self.0;
        let (gk, gna) = self.conductances(y);
        out[0] = (p.i + gk * p.v_k + gna * p.v_na + p.g_l * p.v_l) / p.c;
    }
}

#[derive(Debug, Clone)]
struct Gates;

impl LinearBlock for Gates {
    fn matrix(&self, x: &[f64], _t: f64) -> StructuredMatrix {
        let r = HHRates::at(x[0]);
        StructuredMatrix::Diagonal((0..3).map(|k| -(r.alpha[k] + r.beta[k])).collect())
    }

    fn offset(&self, x: &[f64], _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&HHRates::at(x[0]).alpha);
    }
}

/// Hodgkin-Huxley with the voltage as x-block.
#[derive(Debug, Clone)]
pub struct HodgkinHuxley {
    params: HHParams,
    voltage: Voltage,
    gates: Gates,
}

impl HodgkinHuxley {
    pub fn new(params: HHParams) -> Self {
        HodgkinHuxley {
            params,
            voltage: Voltage(params),
            gates: Gates,
        }
    }

    pub fn params(&self) -> &HHParams {
        &self.params
    }
}

impl PartitionedSystem for HodgkinHuxley {
    fn name(&self) -> &str {
        "hh"
    }
    fn nx(&self) -> usize {
        1
    }
    fn ny(&self) -> usize {
        3
    }

    fn eval_f(&self, x: &[f64], y: &[f64], _t: f64, out: &mut [f64]) {
        let p = &self.params;
        let v = x[0];
        let (m, n, h) = (y[0], y[1], y[2]);
        out[0] = (p.i
            - p.g_k * n.powi(4) * (v - p.v_k)
            - p.g_na * m.powi(3) * h * (v - p.v_na)
            - p.g_l * (v - p.v_l))
            / p.c;
    }

    fn eval_g(&self, x: &[f64], y: &[f64], _t: f64, out: &mut [f64]) {
        let r = HHRates::at(x[0]);
        for k in 0..3 {
            out[k] = r.alpha[k] * (1.0 - y[k]) - r.beta[k] * y[k];
        }
    }

    fn typical_size(&self) -> Vec<f64> {
        vec![100.0, 1.0, 1.0, 1.0]
    }

    fn linear_block(&self, block: Block) -> Option<&dyn LinearBlock> {
        match block {
            Block::X => Some(&self.voltage),
            Block::Y => Some(&self.gates),
        }
    }

    fn sample_box(&self) -> Vec<(f64, f64)> {
        vec![(-120.0, 20.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)]
    }
}
