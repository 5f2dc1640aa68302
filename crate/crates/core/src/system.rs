//! Partitioned systems, split states and evaluation bookkeeping.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::StructuredMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    X,
    Y,
}

impl Block {
    pub fn other(self) -> Block {
        match self {
            Block::X => Block::Y,
            Block::Y => Block::X,
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::X => "x",
            Block::Y => "y",
        })
    }
}

/// Time plus the two solution blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SplitState {
    pub fn new(t: f64, x: Vec<f64>, y: Vec<f64>) -> Self {
        SplitState { t, x, y }
    }

    /// Splits a stacked vector `z = (x, y)` after `nx` entries.
    pub fn from_stacked(t: f64, z: &[f64], nx: usize) -> Self {
        SplitState {
            t,
            x: z[..nx].to_vec(),
            y: z[nx..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.x.len() + self.y.len());
        z.extend_from_slice(&self.x);
        z.extend_from_slice(&self.y);
        z
    }

    pub fn block(&self, block: Block) -> &[f64] {
        match block {
            Block::X => &self.x,
            Block::Y => &self.y,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}

/// A block that is linear in its own variable.
///
/// For the x-block the right-hand side reads `A(y) x + b(y, t)`; for the
/// y-block it reads `D(x) y + c(x, t)`. In both cases `other` is the
/// remaining block.
pub trait LinearBlock: Send + Sync {
    /// `A(y)` or `D(x)`.
    fn matrix(&self, other: &[f64], t: f64) -> StructuredMatrix;
    /// `b(y, t)` or `c(x, t)`.
    fn offset(&self, other: &[f64], t: f64, out: &mut [f64]);
}

/// Right-hand side split into `x' = f(x, y, t)` and `y' = g(x, y, t)`.
///
/// Implementations must be pure: the same arguments give the same output.
pub trait PartitionedSystem: Send + Sync {
    fn name(&self) -> &str;
    fn nx(&self) -> usize;
    fn ny(&self) -> usize;
    fn eval_f(&self, x: &[f64], y: &[f64], t: f64, out: &mut [f64]);
    fn eval_g(&self, x: &[f64], y: &[f64], t: f64, out: &mut [f64]);

    /// Positive reference magnitudes for all `nx + ny` components, x first.
    fn typical_size(&self) -> Vec<f64>;

    /// Semilinear data for one block, if that block is linear in itself.
    fn linear_block(&self, _block: Block) -> Option<&dyn LinearBlock> {
        None
    }

    /// Sampling box used by [`consistency_check`], x components first.
    fn sample_box(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); self.nx() + self.ny()]
    }

    /// Right-hand side of one block with the other block held fixed.
    fn eval_block(&self, block: Block, own: &[f64], other: &[f64], t: f64, out: &mut [f64]) {
        match block {
            Block::X => self.eval_f(own, other, t, out),
            Block::Y => self.eval_g(other, own, t, out),
        }
    }

    fn block_dim(&self, block: Block) -> usize {
        match block {
            Block::X => self.nx(),
            Block::Y => self.ny(),
        }
    }
}

impl<S: PartitionedSystem + ?Sized> PartitionedSystem for Box<S> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn nx(&self) -> usize {
        (**self).nx()
    }
    fn ny(&self) -> usize {
        (**self).ny()
    }
    fn eval_f(&self, x: &[f64], y: &[f64], t: f64, out: &mut [f64]) {
        (**self).eval_f(x, y, t, out)
    }
    fn eval_g(&self, x: &[f64], y: &[f64], t: f64, out: &mut [f64]) {
        (**self).eval_g(x, y, t, out)
    }
    fn typical_size(&self) -> Vec<f64> {
        (**self).typical_size()
    }
    fn linear_block(&self, block: Block) -> Option<&dyn LinearBlock> {
        (**self).linear_block(block)
    }
    fn sample_box(&self) -> Vec<(f64, f64)> {
        (**self).sample_box()
    }
}

/// Work statistics of one integration.
///
/// `fevals` is measured in units of one combined evaluation of `f` and `g`.
/// Implicit stages are charged at fixed rates regardless of how many Newton
/// iterations they needed; those are tallied in `newton_iterations`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalCounter {
    pub fevals: f64,
    pub jacobian_evals: u64,
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub newton_iterations: u64,
    /// Evaluations spent producing the staggered start value.
    pub startup_fevals: f64,
}

impl EvalCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, units: f64) {
        self.fevals += units;
    }
}

pub(crate) fn check_finite(values: &[f64], block: Block, t: f64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::Evaluation { block, index, t }),
        None => Ok(()),
    }
}

pub(crate) fn check_dims(system: &dyn PartitionedSystem, state: &SplitState) -> Result<()> {
    if state.x.len() != system.nx() {
        return Err(Error::Dimension {
            expected: system.nx(),
            got: state.x.len(),
        });
    }
    if state.y.len() != system.ny() {
        return Err(Error::Dimension {
            expected: system.ny(),
            got: state.y.len(),
        });
    }
    Ok(())
}

/// Evaluates `f` and `g` at `state`, charging one function evaluation.
pub fn evaluate(
    system: &dyn PartitionedSystem,
    state: &SplitState,
    counter: &mut EvalCounter,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dims(system, state)?;
    let mut fx = vec![0.0; system.nx()];
    let mut gy = vec![0.0; system.ny()];
    system.eval_f(&state.x, &state.y, state.t, &mut fx);
    system.eval_g(&state.x, &state.y, state.t, &mut gy);
    counter.charge(1.0);
    check_finite(&fx, Block::X, state.t)?;
    check_finite(&gy, Block::Y, state.t)?;
    Ok((fx, gy))
}

/// Largest relative discrepancy between the direct right-hand side and the
/// assembled semilinear form over `trials` random states in the system's
/// sampling box.
///
/// Differences are measured relative to the magnitude of the assembled
/// terms `|M| |z| + |v|`, so cancellation in the sum does not inflate the
/// result.
pub fn consistency_check(system: &dyn PartitionedSystem, trials: usize, seed: u64) -> Result<f64> {
    let blocks: Vec<Block> = [Block::X, Block::Y]
        .into_iter()
        .filter(|&b| system.linear_block(b).is_some())
        .collect();
    if blocks.is_empty() {
        return Err(Error::Precondition(format!(
            "system {} has no semilinear block",
            system.name()
        )));
    }
    let (nx, ny) = (system.nx(), system.ny());
    let bounds = system.sample_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let z: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
            .collect();
        let t = rng.gen_range(0.0..1.0);
        let (x, y) = z.split_at(nx);
        for &block in &blocks {
            let lin = system.linear_block(block).expect("filtered above");
            let (own, other, n) = match block {
                Block::X => (x, y, nx),
                Block::Y => (y, x, ny),
            };
            let mut direct = vec![0.0; n];
            system.eval_block(block, own, other, t, &mut direct);
            let m = lin.matrix(other, t);
            let mut assembled = vec![0.0; n];
            m.mul_vec(own, &mut assembled);
            let mut v = vec![0.0; n];
            lin.offset(other, t, &mut v);
            for i in 0..n {
                let mag: f64 =
                    (0..n).map(|j| (m.get(i, j) * own[j]).abs()).sum::<f64>() + v[i].abs();
                let total = assembled[i] + v[i];
                let denom = direct[i].abs().max(total.abs()).max(mag);
                if denom > 0.0 {
                    worst = worst.max((direct[i] - total).abs() / denom);
                }
            }
        }
    }
    Ok(worst)
}

/// Exchanges the roles of the two blocks: the returned system has
/// `x_new = y_old` and `y_new = x_old`.
pub struct Swapped<S> {
    inner: S,
    name: String,
}

impl<S: PartitionedSystem> Swapped<S> {
    pub fn new(inner: S) -> Self {
        let name = format!("{}:swapped", inner.name());
        Swapped { inner, name }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: PartitionedSystem> PartitionedSystem for Swapped<S> {
    fn name(&self) -> &str {
        &self.name
    }
    fn nx(&self) -> usize {
        self.inner.ny()
    }
    fn ny(&self) -> usize {
        self.inner.nx()
    }
    fn eval_f(&self, x: &[f64], y: &[f64], t: f64, out: &mut [f64]) {
        self.inner.eval_g(y, x, t, out)
    }
    fn eval_g(&self, x: &[f64], y: &[f64], t: f64, out: &mut [f64]) {
        self.inner.eval_f(y, x, t, out)
    }
    fn typical_size(&self) -> Vec<f64> {
        let mut ts = self.inner.typical_size();
        ts.rotate_left(self.inner.nx());
        ts
    }
    fn linear_block(&self, block: Block) -> Option<&dyn LinearBlock> {
        self.inner.linear_block(block.other())
    }
    fn sample_box(&self) -> Vec<(f64, f64)> {
        let mut b = self.inner.sample_box();
        b.rotate_left(self.inner.nx());
        b
    }
}

/// `f = 0`, `g = 0`.
#[derive(Debug, Clone)]
pub struct ZeroSystem {
    x: ZeroBlock,
    y: ZeroBlock,
}

impl ZeroSystem {
    pub fn new(nx: usize, ny: usize) -> Self {
        ZeroSystem {
            x: ZeroBlock(nx),
            y: ZeroBlock(ny),
        }
    }
}

#[derive(Debug, Clone)]
struct ZeroBlock(usize);

impl LinearBlock for ZeroBlock {
    fn matrix(&self, _other: &[f64], _t: f64) -> StructuredMatrix {
        StructuredMatrix::Diagonal(vec![0.0; self.0])
    }
    fn offset(&self, _other: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
}

impl PartitionedSystem for ZeroSystem {
    fn name(&self) -> &str {
        "zero"
    }
    fn nx(&self) -> usize {
        self.x.0
    }
    fn ny(&self) -> usize {
        self.y.0
    }
    fn eval_f(&self, _x: &[f64], _y: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
    fn eval_g(&self, _x: &[f64], _y: &[f64], _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
    fn typical_size(&self) -> Vec<f64> {
        vec![1.0; self.x.0 + self.y.0]
    }
    fn linear_block(&self, block: Block) -> Option<&dyn LinearBlock> {
        match block {
            Block::X => Some(&self.x),
            Block::Y => Some(&self.y),
        }
    }
}

/// Constant-coefficient linear system
///
/// ```text
/// x' = Axx x + Axy y
/// y' = Ayx x + Ayy y
/// ```
///
/// stored row-major. With `nx = ny = 1` this is the 2x2 partitioned test
/// equation `x' = mu x + a y, y' = b x + lambda y`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    nx: usize,
    ny: usize,
    xx: LinearPart,
    yy: LinearPart,
    typical: Vec<f64>,
    name: String,
}

#[derive(Debug, Clone)]
struct LinearPart {
    own: Vec<f64>,
    coupling: Vec<f64>,
    n_own: usize,
    n_other: usize,
}

impl LinearPart {
    fn apply_coupling(&self, other: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.coupling[i * self.n_other..(i + 1) * self.n_other]
                .iter()
                .zip(other)
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

impl LinearBlock for LinearPart {
    fn matrix(&self, _other: &[f64], _t: f64) -> StructuredMatrix {
        StructuredMatrix::dense(self.n_own, self.own.clone())
    }
    fn offset(&self, other: &[f64], _t: f64, out: &mut [f64]) {
        self.apply_coupling(other, out);
    }
}

impl LinearSystem {
    /// Builds the system from four row-major blocks.
    pub fn new(
        nx: usize,
        ny: usize,
        axx: Vec<f64>,
        axy: Vec<f64>,
        ayx: Vec<f64>,
        ayy: Vec<f64>,
    ) -> Result<Self> {
        for (len, want) in [
            (axx.len(), nx * nx),
            (axy.len(), nx * ny),
            (ayx.len(), ny * nx),
            (ayy.len(), ny * ny),
        ] {
            if len != want {
                return Err(Error::Dimension {
                    expected: want,
                    got: len,
                });
            }
        }
        if nx == 0 || ny == 0 {
            return Err(Error::Precondition("block dimensions must be >= 1".into()));
        }
        Ok(LinearSystem {
            nx,
            ny,
            xx: LinearPart {
                own: axx,
                coupling: axy,
                n_own: nx,
                n_other: ny,
            },
            yy: LinearPart {
                own: ayy,
                coupling: ayx,
                n_own: ny,
                n_other: nx,
            },
            typical: vec![1.0; nx + ny],
            name: "linear".to_string(),
        })
    }

    pub fn test_system(mu: f64, lambda: f64, a: f64, b: f64) -> Self {
        let mut s = Self::new(1, 1, vec![mu], vec![a], vec![b], vec![lambda])
            .expect("scalar blocks are consistent");
        s.name = "test-system".to_string();
        s
    }

    pub fn with_typical_size(mut self, typical: Vec<f64>) -> Self {
        assert_eq!(typical.len(), self.nx + self.ny);
        self.typical = typical;
        self
    }

    /// The full `(nx+ny) x (nx+ny)` matrix, row-major.
    pub fn full_matrix(&self) -> Vec<f64> {
        let n = self.nx + self.ny;
        let mut m = vec![0.0; n * n];
        for i in 0..self.nx {
            for j in 0..self.nx {
                m[i * n + j] = self.xx.own[i * self.nx + j];
            }
            for j in 0..self.ny {
                m[i * n + self.nx + j] = self.xx.coupling[i * self.ny + j];
            }
        }
        for i in 0..self.ny {
            for j in 0..self.nx {
                m[(self.nx + i) * n + j] = self.yy.coupling[i * self.nx + j];
            }
            for j in 0..self.ny {
                m[(self.nx + i) * n + self.nx + j] = self.yy.own[i * self.ny + j];
            }
        }
        m
    }
}

fn affine(part: &LinearPart, own: &[f64], other: &[f64], out: &mut [f64]) {
    part.apply_coupling(other, out);
    for (i, o) in out.iter_mut().enumerate() {
        let row = &part.own[i * part.n_own..(i + 1) * part.n_own];
        let own_term: f64 = row.iter().zip(own).map(|(a, b)| a * b).sum();
        *o += own_term;
    }
}

impl PartitionedSystem for LinearSystem {
    fn name(&self) -> &str {
        &self.name
    }
    fn nx(&self) -> usize {
        self.nx
    }
    fn ny(&self) -> usize {
        self.ny
    }
    fn eval_f(&self, x: &[f64], y: &[f64], _t: f64, out: &mut [f64]) {
        affine(&self.xx, x, y, out)
    }
    fn eval_g(&self, x: &[f64], y: &[f64], _t: f64, out: &mut [f64]) {
        affine(&self.yy, y, x, out)
    }
    fn typical_size(&self) -> Vec<f64> {
        self.typical.clone()
    }
    fn linear_block(&self, block: Block) -> Option<&dyn LinearBlock> {
        match block {
            Block::X => Some(&self.xx),
            Block::Y => Some(&self.yy),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_zero_system_charges_one() {
        let sys = ZeroSystem::new(2, 3);
        let mut c = EvalCounter::new();
        let s = SplitState::new(0.3, vec![1.0, 2.0], vec![3.0, 4.0, 5.0]);
        let (f, g) = evaluate(&sys, &s, &mut c).unwrap();
        assert_eq!(f, vec![0.0; 2]);
        assert_eq!(g, vec![0.0; 3]);
        assert_eq!(c.fevals, 1.0);
    }

    #[test]
    fn evaluate_test_system() {
        let sys = LinearSystem::test_system(-1.0, -2.0, 0.0, 0.0);
        let mut c = EvalCounter::new();
        let (f, g) = evaluate(&sys, &SplitState::new(0.0, vec![1.0], vec![1.0]), &mut c).unwrap();
        assert_eq!((f[0], g[0]), (-1.0, -2.0));
    }

    struct Blowup;
    impl PartitionedSystem for Blowup {
        fn name(&self) -> &str {
            "blowup"
        }
        fn nx(&self) -> usize {
            1
        }
        fn ny(&self) -> usize {
            2
        }
        fn eval_f(&self, _x: &[f64], _y: &[f64], _t: f64, out: &mut [f64]) {
            out[0] = 1.0;
        }
        fn eval_g(&self, _x: &[f64], _y: &[f64], _t: f64, out: &mut [f64]) {
            out[0] = 0.0;
            out[1] = f64::NAN;
        }
        fn typical_size(&self) -> Vec<f64> {
            vec![1.0; 3]
        }
    }

    #[test]
    fn evaluate_reports_first_nonfinite_component() {
        let mut c = EvalCounter::new();
        let err = evaluate(
            &Blowup,
            &SplitState::new(2.0, vec![0.0], vec![0.0, 0.0]),
            &mut c,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::Evaluation {
                block: Block::Y,
                index: 1,
                t: 2.0
            }
        );
    }

    #[test]
    fn evaluate_rejects_wrong_dimensions() {
        let mut c = EvalCounter::new();
        let sys = ZeroSystem::new(1, 1);
        assert!(evaluate(
            &sys,
            &SplitState::new(0.0, vec![0.0, 1.0], vec![0.0]),
            &mut c
        )
        .is_err());
    }

    #[test]
    fn linear_test_system_is_exactly_consistent() {
        let sys = LinearSystem::test_system(-1.5, -0.5, 0.7, -2.0);
        assert_eq!(consistency_check(&sys, 200, 3).unwrap(), 0.0);
    }

    #[test]
    fn swapped_exchanges_blocks() {
        let sys = LinearSystem::new(
            1,
            2,
            vec![-1.0],
            vec![2.0, 3.0],
            vec![4.0, 5.0],
            vec![-6.0, 0.0, 0.0, -7.0],
        )
        .unwrap()
        .with_typical_size(vec![10.0, 1.0, 2.0]);
        let sw = Swapped::new(sys.clone());
        assert_eq!((sw.nx(), sw.ny()), (2, 1));
        assert_eq!(sw.typical_size(), vec![1.0, 2.0, 10.0]);
        let (x, y) = ([0.5], [1.0, -1.0]);
        let mut g = [0.0; 2];
        sys.eval_g(&x, &y, 0.0, &mut g);
        let mut f_sw = [0.0; 2];
        sw.eval_f(&y, &x, 0.0, &mut f_sw);
        assert_eq!(g, f_sw);
        assert_eq!(consistency_check(&sw, 20, 1).unwrap(), 0.0);
    }

    #[test]
    fn no_semilinear_data_is_a_precondition_error() {
        assert!(matches!(
            consistency_check(&Blowup, 1, 0),
            Err(Error::Precondition(_))
        ));
    }
}
