#![allow(dead_code)]

use parthines::LinearSystem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub fn matvec(n: usize, a: &[f64], v: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum())
        .collect()
}

/// Matrix exponential by scaling and squaring of a 24-term Taylor series.
pub fn expm(n: usize, a: &[f64]) -> Vec<f64> {
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let scale = 2f64.powi(-s);
    let a: Vec<f64> = a.iter().map(|v| v * scale).collect();
    let mut result = vec![0.0; n * n];
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        result[i * n + i] = 1.0;
        term[i * n + i] = 1.0;
    }
    for k in 1..=24 {
        term = matmul(n, &term, &a);
        for v in term.iter_mut() {
            *v /= k as f64;
        }
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
        }
    }
    for _ in 0..s {
        result = matmul(n, &result, &result);
    }
    result
}

/// `exp(t M) z0` for a linear system.
pub fn exact_flow(sys: &LinearSystem, z0: &[f64], t: f64) -> Vec<f64> {
    let n = z0.len();
    let m: Vec<f64> = sys.full_matrix().iter().map(|v| v * t).collect();
    matvec(n, &expm(n, &m), z0)
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Random block matrix with diagonally dominant negative diagonal.
pub fn random_linear_system(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> LinearSystem {
    let n = nx + ny;
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = rng.gen_range(-1.0..1.0);
        }
        m[i * n + i] = -(n as f64) - rng.gen_range(0.0..2.0);
    }
    let block = |r0: usize, r1: usize, c0: usize, c1: usize| -> Vec<f64> {
        (r0..r1)
            .flat_map(|i| (c0..c1).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j])
            .collect()
    };
    LinearSystem::new(
        nx,
        ny,
        block(0, nx, 0, nx),
        block(0, nx, nx, n),
        block(nx, n, 0, nx),
        block(nx, n, nx, n),
    )
    .unwrap()
}

/// Random test-equation parameters with `mu, lambda < 0` and `ab < mu lambda`.
pub fn random_admissible(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    loop {
        let mu = -10f64.powf(rng.gen_range(-2.0..2.0));
        let lambda = -10f64.powf(rng.gen_range(-2.0..2.0));
        let a = rng.gen_range(-5.0..5.0) * mu.abs().sqrt();
        let b = rng.gen_range(-5.0..5.0) * lambda.abs().sqrt();
        if a * b < mu * lambda {
            return (mu, lambda, a, b);
        }
    }
}

/// Independent transcription of the classical Hodgkin-Huxley right-hand
/// side for the state `(V, m, n, h)`.
pub fn hh_rhs(z: &[f64]) -> [f64; 4] {
    let (v, m, n, h) = (z[0], z[1], z[2], z[3]);
    let vtrap = |u: f64| if u == 0.0 { 1.0 } else { u / (u.exp() - 1.0) };
    let an = 0.1 * vtrap((v + 10.0) / 10.0);
    let bn = 0.125 * (v / 80.0).exp();
    let am = vtrap((v + 25.0) / 10.0);
    let bm = 4.0 * (v / 18.0).exp();
    let ah = 0.07 * (v / 20.0).exp();
    let bh = 1.0 / ((v + 30.0) / 10.0).exp().ln_1p().exp();
    let i_k = 36.0 * n * n * n * n * (v - 12.0);
    let i_na = 120.0 * m * m * m * h * (v + 115.0);
    let i_l = 0.3 * (v + 10.599);
    [
        14.2 - i_k - i_na - i_l,
        am * (1.0 - m) - bm * m,
        an * (1.0 - n) - bn * n,
        ah * (1.0 - h) - bh * h,
    ]
}
