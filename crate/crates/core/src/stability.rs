//! Linear stability of the partitioned methods on the test equation
//!
//! ```text
//! x' = mu x + a y
//! y' = b x + lambda y,      mu, lambda < 0,  a b < mu lambda
//! ```
//!
//! Every method considered here (modified, Hines, Strang) has the
//! characteristic polynomial
//! `s^2 - (alpha + beta + gamma (alpha - 1)(beta - 1)) s + alpha beta`
//! with `gamma = a b / (mu lambda)`; only the stability functions `alpha`
//! and `beta` differ. The roots lie inside the unit disc iff
//! `-(1 + alpha)(1 + beta) / ((1 - alpha)(1 - beta)) < gamma < 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

pub fn trace(m: &Mat2) -> f64 {
    m[0][0] + m[1][1]
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mat_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Largest eigenvalue modulus of a 2x2 matrix.
pub fn spectral_radius(m: &Mat2) -> f64 {
    let roots = quadratic_roots(-trace(m), det(m));
    roots[0].norm().max(roots[1].norm())
}

/// Roots of `s^2 + p s + q`, computed without cancellation.
pub fn quadratic_roots(p: f64, q: f64) -> [Complex64; 2] {
    let disc = p * p - 4.0 * q;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // p and the square root get the same sign so they never cancel
        let big = -0.5 * (p + p.signum() * sq);
        if big == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(big, 0.0), Complex64::new(q / big, 0.0)]
    } else {
        let re = -0.5 * p;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

/// Parameters of the partitioned test equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSystemParams {
    pub mu: f64,
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
}

impl TestSystemParams {
    pub fn new(mu: f64, lambda: f64, a: f64, b: f64) -> Self {
        TestSystemParams { mu, lambda, a, b }
    }

    /// `a b / (mu lambda)`
    pub fn gamma(&self) -> f64 {
        self.a * self.b / (self.mu * self.lambda)
    }

    /// `mu, lambda < 0` and `a b < mu lambda`.
    pub fn is_admissible(&self) -> bool {
        self.mu < 0.0 && self.lambda < 0.0 && self.a * self.b < self.mu * self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// Trapezoidal / midpoint stability functions `(1 + z/2) / (1 - z/2)`.
    Discrete,
    /// Exact exponentials `exp(z)`.
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecursionMethod {
    Modified,
    Hines,
    Strang,
}

impl RecursionMethod {
    pub fn flavor(self) -> Flavor {
        match self {
            RecursionMethod::Modified | RecursionMethod::Hines => Flavor::Discrete,
            RecursionMethod::Strang => Flavor::Strang,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RecursionMethod::Modified => "modified",
            RecursionMethod::Hines => "hines",
            RecursionMethod::Strang => "strang",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "modified" | "cmhines" => Some(RecursionMethod::Modified),
            "hines" => Some(RecursionMethod::Hines),
            "strang" => Some(RecursionMethod::Strang),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityFunctions {
    pub alpha: f64,
    pub beta: f64,
    pub flavor: Flavor,
}

fn discrete_factor(z: f64) -> Result<f64> {
    if z == 2.0 {
        return Err(Error::Domain(format!(
            "pole of the stability function at h*rate = {z}"
        )));
    }
    Ok((1.0 + 0.5 * z) / (1.0 - 0.5 * z))
}

pub fn stability_functions(
    params: &TestSystemParams,
    h: f64,
    flavor: Flavor,
) -> Result<StabilityFunctions> {
    let (alpha, beta) = match flavor {
        Flavor::Discrete => (
            discrete_factor(h * params.mu)?,
            discrete_factor(h * params.lambda)?,
        ),
        Flavor::Strang => ((h * params.mu).exp(), (h * params.lambda).exp()),
    };
    Ok(StabilityFunctions {
        alpha,
        beta,
        flavor,
    })
}

fn check_rates(params: &TestSystemParams, h: f64) -> Result<()> {
    if params.mu == 0.0 || params.lambda == 0.0 {
        return Err(Error::Domain("mu and lambda must be nonzero".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Precondition(format!(
            "step size must be positive, got {h}"
        )));
    }
    Ok(())
}

/// One-step recursion matrix of the chosen method on the test equation.
pub fn recursion_matrix(
    params: &TestSystemParams,
    h: f64,
    method: RecursionMethod,
) -> Result<Mat2> {
    check_rates(params, h)?;
    let TestSystemParams { mu, lambda, a, b } = *params;
    let gamma = params.gamma();
    match method {
        RecursionMethod::Modified => {
            let StabilityFunctions { alpha, beta, .. } =
                stability_functions(params, h, Flavor::Discrete)?;
            let dm = 1.0 - 0.5 * h * mu;
            let dl = 1.0 - 0.5 * h * lambda;
            Ok([
                [
                    alpha * (1.0 + gamma * 0.5 * h * mu * (beta - 1.0)),
                    h * a * (1.0 / (dm * dl) + 0.25 * gamma * (alpha - 1.0) * (beta - 1.0)),
                ],
                [
                    h * b * (1.0 + 0.5 * h * mu) / dl,
                    beta + gamma * (beta - 1.0) * 0.5 * h * mu,
                ],
            ])
        }
        RecursionMethod::Hines => {
            let StabilityFunctions { alpha, beta, .. } =
                stability_functions(params, h, Flavor::Discrete)?;
            let dm = 1.0 - 0.5 * h * mu;
            let dl = 1.0 - 0.5 * h * lambda;
            Ok([
                [alpha, h * a / dm],
                [
                    alpha * h * b / dl,
                    beta + gamma * (1.0 - alpha) * (1.0 - beta),
                ],
            ])
        }
        RecursionMethod::Strang => crate::splitting::strang_linear_propagator(params, h),
    }
}

/// The modified method's recursion assembled as `A^{-1} B` from the
/// implicit form `A z_{n+1} = B z_n`.
pub fn recursion_matrix_from_implicit_form(params: &TestSystemParams, h: f64) -> Result<Mat2> {
    check_rates(params, h)?;
    let TestSystemParams { mu, lambda, a, b } = *params;
    let a11 = 1.0 - 0.5 * h * mu;
    let a12 = -0.5 * h * a;
    let a22 = 1.0 - 0.5 * h * lambda;
    if a11 == 0.0 || a22 == 0.0 {
        return Err(Error::Domain("pole of the stability function".into()));
    }
    let bm: Mat2 = [
        [1.0 + 0.5 * h * mu, 0.5 * h * a],
        [
            h * b * (1.0 + 0.5 * h * mu),
            1.0 + 0.5 * h * lambda + 0.5 * a * b * h * h,
        ],
    ];
    // back substitution with the upper triangular A, column by column
    let mut c = [[0.0; 2]; 2];
    for j in 0..2 {
        c[1][j] = bm[1][j] / a22;
        c[0][j] = (bm[0][j] - a12 * c[1][j]) / a11;
    }
    Ok(c)
}

/// Coefficients `(p, q)` of `s^2 + p s + q`.
pub fn char_poly(alpha: f64, beta: f64, gamma: f64) -> (f64, f64) {
    (
        -(alpha + beta + gamma * (alpha - 1.0) * (beta - 1.0)),
        alpha * beta,
    )
}

/// `-(1 + alpha)(1 + beta) / ((1 - alpha)(1 - beta))`
pub fn lower_gamma_bound(alpha: f64, beta: f64) -> f64 {
    -(1.0 + alpha) * (1.0 + beta) / ((1.0 - alpha) * (1.0 - beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Signed distance of gamma to the nearer end of the stability
    /// interval, positive inside.
    pub margin: f64,
    pub lower: f64,
}

/// Root-location criterion for `|alpha|, |beta| < 1`.
pub fn is_stable(alpha: f64, beta: f64, gamma: f64) -> Result<StabilityVerdict> {
    if !(alpha.abs() < 1.0 && beta.abs() < 1.0) {
        return Err(Error::Precondition(format!(
            "need |alpha| < 1 and |beta| < 1, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let lower = lower_gamma_bound(alpha, beta);
    let margin = (gamma - lower).min(1.0 - gamma);
    Ok(StabilityVerdict {
        stable: margin > 0.0,
        margin,
        lower,
    })
}

/// `(1 + r(z)) / (1 - r(z))` for the stability function `r` of `flavor`,
/// evaluated without cancellation.
fn bound_factor(z: f64, flavor: Flavor) -> f64 {
    match flavor {
        Flavor::Discrete => -2.0 / z,
        Flavor::Strang => -(1.0 + z.exp()) / z.exp_m1(),
    }
}

/// `phi(h) = (1 + alpha)(1 + beta) / ((1 - alpha)(1 - beta))`; the lower
/// end of the stability interval is `-phi(h)`.
pub fn bound_function(params: &TestSystemParams, h: f64, flavor: Flavor) -> f64 {
    bound_factor(h * params.mu, flavor) * bound_factor(h * params.lambda, flavor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Stable for every step size.
    Unbounded,
    /// Unstable for all `h` above this value.
    Critical(f64),
}

/// Largest stable step size, found by bisection on the monotone bound
/// function.
///
/// For the discrete methods the lower bound `-phi(h)` increases to 0 as
/// `h -> inf`, so every `gamma < 0` has a finite critical step. For Strang
/// the bound increases to -1, so only `gamma < -1` does.
pub fn stability_boundary_h(
    params: &TestSystemParams,
    method: RecursionMethod,
) -> Result<Boundary> {
    if !(params.mu < 0.0 && params.lambda < 0.0) {
        return Err(Error::Precondition("need mu < 0 and lambda < 0".into()));
    }
    let gamma = params.gamma();
    if !(gamma < 1.0) {
        return Err(Error::Precondition(format!("need gamma < 1, got {gamma}")));
    }
    let flavor = method.flavor();
    let limit = match flavor {
        Flavor::Discrete => 0.0,
        Flavor::Strang => -1.0,
    };
    if gamma >= limit {
        return Ok(Boundary::Unbounded);
    }
    let target = -gamma;
    // phi decreasing: phi(lo) > target > phi(hi)
    let (mut lo, mut hi) = (1e-8_f64, 1e8_f64);
    while bound_function(params, lo, flavor) <= target {
        lo *= 1e-4;
        if lo < 1e-300 {
            return Err(Error::Domain(
                "could not bracket the critical step size".into(),
            ));
        }
    }
    while bound_function(params, hi, flavor) >= target {
        hi *= 1e4;
        if !hi.is_finite() {
            return Err(Error::Domain(
                "could not bracket the critical step size".into(),
            ));
        }
    }
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if bound_function(params, mid, flavor) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(Boundary::Critical(0.5 * (lo + hi)))
}

/// Smallest one-sided Lipschitz constants of `F1 = (mu x + a y, 0)` and
/// `F2 = (0, b x + lambda y)`: `(mu + sqrt(mu^2 + a^2)) / 2` and
/// `(lambda + sqrt(lambda^2 + b^2)) / 2`.
pub fn monotonicity_nu(params: &TestSystemParams) -> (f64, f64) {
    (
        half_max_eig(params.mu, params.a),
        half_max_eig(params.lambda, params.b),
    )
}

fn half_max_eig(diag: f64, off: f64) -> f64 {
    let r = diag.hypot(off);
    if diag >= 0.0 {
        0.5 * (diag + r)
    } else if r == -diag {
        0.0
    } else {
        0.5 * off * off / (r - diag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_modified_is_diagonal() {
        let p = TestSystemParams::new(-1.0, -3.0, 0.0, 0.0);
        let c = recursion_matrix(&p, 0.4, RecursionMethod::Modified).unwrap();
        let f = stability_functions(&p, 0.4, Flavor::Discrete).unwrap();
        assert_eq!(c, [[f.alpha, 0.0], [0.0, f.beta]]);
    }

    #[test]
    fn vanishing_stability_functions() {
        // mu = lambda = -2, h = 1 gives alpha = beta = 0 and chi(s) = s^2 - gamma s
        let p = TestSystemParams::new(-2.0, -2.0, 1.0, 2.0);
        let f = stability_functions(&p, 1.0, Flavor::Discrete).unwrap();
        assert_eq!((f.alpha, f.beta), (0.0, 0.0));
        let (lin, con) = char_poly(f.alpha, f.beta, p.gamma());
        assert_eq!(lin, -p.gamma());
        assert_eq!(con, 0.0);
        let c = recursion_matrix(&p, 1.0, RecursionMethod::Modified).unwrap();
        assert!((trace(&c) - p.gamma()).abs() < 1e-15);
        assert!(det(&c).abs() < 1e-15);
    }

    #[test]
    fn pole_is_domain_error() {
        let p = TestSystemParams::new(2.0, -1.0, 0.0, 0.0);
        assert!(matches!(
            recursion_matrix(&p, 1.0, RecursionMethod::Modified),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn char_poly_special_gammas() {
        let (p, q) = char_poly(0.3, -0.6, 0.0);
        let r = quadratic_roots(p, q);
        let mut re = [r[0].re, r[1].re];
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 0.6).abs() < 1e-15 && (re[1] - 0.3).abs() < 1e-15);
        let (p, q) = char_poly(0.3, -0.6, 1.0);
        assert!((1.0 + p + q).abs() < 1e-15);
    }

    #[test]
    fn verdicts_at_zero_alpha_beta() {
        assert!(is_stable(0.0, 0.0, -0.5).unwrap().stable);
        assert!(!is_stable(0.0, 0.0, -1.5).unwrap().stable);
        assert!(is_stable(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn quadratic_roots_avoid_cancellation() {
        let r = quadratic_roots(-1e8, 1.0);
        let small = r[0].re.min(r[1].re);
        assert!((small - 1e-8).abs() < 1e-22);
    }

    #[test]
    fn boundary_cases() {
        let p = TestSystemParams::new(-2.0, -2.0, 1.0, 1.0);
        assert_eq!(
            stability_boundary_h(&p, RecursionMethod::Modified).unwrap(),
            Boundary::Unbounded
        );
        let p = TestSystemParams::new(-2.0, -2.0, 2.0, -2.0);
        assert_eq!(p.gamma(), -1.0);
        match stability_boundary_h(&p, RecursionMethod::Modified).unwrap() {
            Boundary::Critical(h) => assert!((h - 1.0).abs() < 1e-10),
            other => panic!("{other:?}"),
        }
        let p = TestSystemParams::new(-2.0, -3.0, 1.0, -3.0);
        assert_eq!(
            stability_boundary_h(&p, RecursionMethod::Strang).unwrap(),
            Boundary::Unbounded
        );
    }

    #[test]
    fn nu_values() {
        assert_eq!(
            monotonicity_nu(&TestSystemParams::new(-1.0, -2.0, 0.0, 0.0)),
            (0.0, 0.0)
        );
        let (nf, _) = monotonicity_nu(&TestSystemParams::new(-3.0, -1.0, 4.0, 0.0));
        assert!((nf - 1.0).abs() < 1e-15);
    }
}
