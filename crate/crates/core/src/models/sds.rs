//! Three-compartment soma-dendrite-spine neuron with a calcium pool.
//!
//! State: `x = [V1, V2, V3]`, `y = [c_Ca, n, m, h, r, s]`. The voltages are
//! coupled through a tridiagonal conductance matrix. The y-block is not
//! linear in itself because the calcium influx carries `s^2 r`, so only the
//! voltage block provides semilinear data.

use super::psi;
use crate::linalg::StructuredMatrix;
use crate::system::{Block, LinearBlock, PartitionedSystem};

/// Sign in front of the closing term of the gate equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateSign {
    /// `alpha (1 - P) - beta P`
    #[default]
    Standard,
    /// `alpha (1 - P) + beta P`
    Verbatim,
}

impl GateSign {
    pub fn name(self) -> &'static str {
        match self {
            GateSign::Standard => "standard",
            GateSign::Verbatim => "verbatim",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standard" => Some(GateSign::Standard),
            "verbatim" => Some(GateSign::Verbatim),
            _ => None,
        }
    }

    fn factor(self) -> f64 {
        match self {
            GateSign::Standard => -1.0,
            GateSign::Verbatim => 1.0,
        }
    }
}

/// SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SDSParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub rm1: f64,
    pub rm2: f64,
    pub rm3: f64,
    pub ra2: f64,
    pub ra3: f64,
    pub v_na: f64,
    pub v_k: f64,
    pub v_ca: f64,
    pub v_l: f64,
    pub g_na: f64,
    pub g_k: f64,
    pub g_ca: f64,
    pub g_kca: f64,
    pub i: f64,
    pub tau: f64,
    pub b: f64,
    pub gate_sign: GateSign,
}

impl Default for SDSParams {
    fn default() -> Self {
        SDSParams {
            c1: 3.6e-11,
            c2: 2e-11,
            c3: 9.6e-15,
            rm1: 8.333e8,
            rm2: 1.5e9,
            rm3: 3.125e12,
            ra2: 5e8,
            ra3: 3e7,
            v_na: 0.045,
            v_k: -0.085,
            v_ca: 0.07,
            v_l: -0.0594,
            g_na: 5.4e-7,
            g_k: 5.4e-8,
            g_ca: 9.6e-13,
            g_kca: 7.68e-12,
            i: 0.09e-9,
            tau: 0.1,
            b: 4.51389e12,
            gate_sign: GateSign::Standard,
        }
    }
}

/// `(V1, V2, V3, c_Ca, n, m, h, r, s)`
pub const DEFAULT_INITIAL: [f64; 9] = [0.07, 0.06, 0.06, 1.6e-4, 0.8, 1.0, 0.3, 1.0, 0.11];
pub const DEFAULT_T_END: f64 = 0.1;

pub fn alpha_h(v1: f64) -> f64 {
    70.0 * (-50.0 * (v1 + 0.07)).exp()
}
pub fn beta_h(v1: f64) -> f64 {
    1000.0 / (1.0 + (-100.0 * (v1 + 0.04)).exp())
}
pub fn alpha_m(v1: f64) -> f64 {
    1e3 * psi(-100.0 * (v1 + 0.045))
}
pub fn beta_m(v1: f64) -> f64 {
    4000.0 * (-(v1 + 0.07) / 0.018).exp()
}
pub fn alpha_n(v1: f64) -> f64 {
    100.0 * psi(-100.0 * (v1 + 0.06))
}
pub fn beta_n(v1: f64) -> f64 {
    125.0 * (-12.5 * (v1 + 0.07)).exp()
}
pub fn alpha_r(v3: f64) -> f64 {
    if v3 <= -0.07 {
        5.0
    } else {
        5.0 * (-50.0 * (v3 + 0.07)).exp()
    }
}
pub fn beta_r(v3: f64) -> f64 {
    5.0 - alpha_r(v3)
}
pub fn alpha_s(v3: f64) -> f64 {
    1600.0 / (1.0 + (-72.0 * (v3 + 0.005)).exp())
}
pub fn beta_s(v3: f64) -> f64 {
    100.0 * psi(200.0 * (v3 + 0.0189))
}

/// Rates ordered like the gates in the state, `(n, m, h, r, s)`.
pub fn gate_rates(v1: f64, v3: f64) -> ([f64; 5], [f64; 5]) {
    (
        [
            alpha_n(v1),
            alpha_m(v1),
            alpha_h(v1),
            alpha_r(v3),
            alpha_s(v3),
        ],
        [beta_n(v1), beta_m(v1), beta_h(v1), beta_r(v3), beta_s(v3)],
    )
}

#[derive(Debug, Clone)]
struct Voltages(SDSParams);

impl Voltages {
    // Channel conductances (soma K, soma Na, spine Ca, spine KCa).
    fn channels(&self, y: &[f64]) -> [f64; 4] {
        let p = &self.0;
        let (c, n, m, h, r, s) = (y[0], y[1], y[2], y[3], y[4], y[5]);
        [
            p.g_k * n.powi(4),
            p.g_na * m.powi(3) * h,
            p.g_ca * s * s * r,
            p.g_kca * c,
        ]
    }
}

impl LinearBlock for Voltages {
    fn matrix(&self, y: &[f64], _t: f64) -> StructuredMatrix {
        let p = &self.0;
        let [gk, gna, gca, gkca] = self.channels(y);
        let (ga2, ga3) = (1.0 / p.ra2, 1.0 / p.ra3);
        StructuredMatrix::Tridiagonal {
            lower: vec![ga2 / p.c2, ga3 / p.c3],
            diag: vec![
                -(gk + gna + ga2 + 1.0 / p.rm1) / p.c1,
                -(ga2 + ga3 + 1.0 / p.rm2) / p.c2,
                -(gca + gkca + ga3 + 1.0 / p.rm3) / p.c3,
            ],
            upper: vec![ga2 / p.c1, ga3 / p.c2],
        }
    }

    fn offset(&self, y: &[f64], _t: f64, out: &mut [f64]) {
        let p = &self.0;
        let [gk, gna, gca, gkca] = self.channels(y);
        out[0] = (p.i + gk * p.v_k + gna * p.v_na + p.v_l / p.rm1) / p.c1;
        out[1] = p.v_l / (p.rm2 * p.c2);
        out[2] = (gca * p.v_ca + gkca * p.v_k + p.v_l / p.rm3) / p.c3;
    }
}

#[derive(Debug, Clone)]
pub struct SomaDendriteSpine {
    params: SDSParams,
    voltages: Voltages,
}

impl SomaDendriteSpine {
    pub fn new(params: SDSParams) -> Self {
        SomaDendriteSpine {
            params,
            voltages: Voltages(params),
        }
    }

    pub fn params(&self) -> &SDSParams {
        &self.params
    }
}

impl PartitionedSystem for SomaDendriteSpine {
    fn name(&self) -> &str {
        "sds"
    }
    fn nx(&self) -> usize {
        3
    }
    fn ny(&self) -> usize {
        6
    }

    fn eval_f(&self, x: &[f64], y: &[f64], _t: f64, out: &mut [f64]) {
        let p = &self.params;
        let (v1, v2, v3) = (x[0], x[1], x[2]);
        let (c, n, m, h, r, s) = (y[0], y[1], y[2], y[3], y[4], y[5]);
        out[0] = (p.i - p.g_k * n.powi(4) * (v1 - p.v_k) - p.g_na * m.powi(3) * h * (v1 - p.v_na)
            + (v2 - v1) / p.ra2
            - (v1 - p.v_l) / p.rm1)
            / p.c1;
        out[1] = ((v1 - v2) / p.ra2 + (v3 - v2) / p.ra3 - (v2 - p.v_l) / p.rm2) / p.c2;
        out[2] = (-p.g_ca * s * s * r * (v3 - p.v_ca) - p.g_kca * c * (v3 - p.v_k)
            + (v2 - v3) / p.ra3
            - (v3 - p.v_l) / p.rm3)
            / p.c3;
    }

    fn eval_g(&self, x: &[f64], y: &[f64], _t: f64, out: &mut [f64]) {
        let p = &self.params;
        let (r, s) = (y[4], y[5]);
        out[0] = p.g_ca * s * s * r * p.b * (p.v_ca - x[2]) - y[0] / p.tau;
        let (alpha, beta) = gate_rates(x[0], x[2]);
        let sign = p.gate_sign.factor();
        for k in 0..5 {
            let g = y[k + 1];
            out[k + 1] = alpha[k] * (1.0 - g) + sign * beta[k] * g;
        }
    }

    fn typical_size(&self) -> Vec<f64> {
        vec![0.1, 0.1, 0.1, 1e-4, 1.0, 1.0, 1.0, 1.0, 1.0]
    }

    fn linear_block(&self, block: Block) -> Option<&dyn LinearBlock> {
        match block {
            Block::X => Some(&self.voltages),
            Block::Y => None,
        }
    }

    fn sample_box(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(-0.1, 0.1); 3];
        b.push((0.0, 1e-3));
        b.extend([(0.0, 1.0); 5]);
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::consistency_check;

    #[test]
    fn alpha_r_is_continuous() {
        assert_eq!(alpha_r(-0.07), 5.0);
        assert_eq!(alpha_r(-0.07 + 1e-300), 5.0);
        assert!((alpha_r(-0.07 + 1e-12) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn beta_r_complements_alpha_r() {
        for k in -100..=100 {
            let v = k as f64 * 1e-3;
            assert_eq!(alpha_r(v) + beta_r(v), 5.0);
        }
    }

    #[test]
    fn voltage_block_is_semilinear() {
        let sys = SomaDendriteSpine::new(SDSParams::default());
        assert!(consistency_check(&sys, 500, 11).unwrap() <= 1e-12);
    }

    #[test]
    fn coupling_pattern_is_symmetric() {
        let p = SDSParams::default();
        let m = Voltages(p).matrix(&[1e-4, 0.5, 0.5, 0.5, 0.5, 0.5], 0.0);
        // conductance times capacitance recovers the same axial resistance
        assert_eq!(m.get(0, 1) * p.c1, m.get(1, 0) * p.c2);
        assert!((m.get(1, 2) * p.c2 - m.get(2, 1) * p.c3).abs() <= 1e-15 * m.get(1, 2) * p.c2);
    }
}
