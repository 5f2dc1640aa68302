//! Structured matrices and the shifted solves used by the implicit stages.
//!
//! Every implicit stage of the partitioned methods has the form
//! `(I - s M) z = r` where `M` is the block matrix `A(y)` or `D(x)`. The
//! structure of `M` is declared by the model, so the solve picks a
//! component-wise division, a tridiagonal sweep or a pivoted LU.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Diagonal,
    Tridiagonal,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("singular matrix (pivot {pivot} = {value:e})")]
pub struct Singular {
    pub pivot: usize,
    pub value: f64,
}

/// Square matrix tagged with its sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum StructuredMatrix {
    Diagonal(Vec<f64>),
    /// `lower[i] = M[i+1][i]`, `upper[i] = M[i][i+1]`.
    Tridiagonal {
        lower: Vec<f64>,
        diag: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Row-major storage.
    Dense {
        n: usize,
        data: Vec<f64>,
    },
}

// Relative pivot threshold below which a shifted matrix counts as singular.
const PIVOT_TOL: f64 = 8.0 * f64::EPSILON;

impl StructuredMatrix {
    pub fn dense(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "dense matrix data must be n*n");
        StructuredMatrix::Dense { n, data }
    }

    pub fn dim(&self) -> usize {
        match self {
            StructuredMatrix::Diagonal(d) => d.len(),
            StructuredMatrix::Tridiagonal { diag, .. } => diag.len(),
            StructuredMatrix::Dense { n, .. } => *n,
        }
    }

    pub fn structure(&self) -> Structure {
        match self {
            StructuredMatrix::Diagonal(_) => Structure::Diagonal,
            StructuredMatrix::Tridiagonal { .. } => Structure::Tridiagonal,
            StructuredMatrix::Dense { .. } => Structure::Dense,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            StructuredMatrix::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
            StructuredMatrix::Tridiagonal { lower, diag, upper } => {
                if i == j {
                    diag[i]
                } else if i == j + 1 {
                    lower[j]
                } else if j == i + 1 {
                    upper[i]
                } else {
                    0.0
                }
            }
            StructuredMatrix::Dense { n, data } => data[i * n + j],
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j);
            }
        }
        out
    }

    /// `out = M v`
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        match self {
            StructuredMatrix::Diagonal(d) => {
                for i in 0..n {
                    out[i] = d[i] * v[i];
                }
            }
            StructuredMatrix::Tridiagonal { lower, diag, upper } => {
                for i in 0..n {
                    let mut acc = diag[i] * v[i];
                    if i > 0 {
                        acc += lower[i - 1] * v[i - 1];
                    }
                    if i + 1 < n {
                        acc += upper[i] * v[i + 1];
                    }
                    out[i] = acc;
                }
            }
            StructuredMatrix::Dense { n, data } => {
                for i in 0..*n {
                    out[i] = data[i * n..(i + 1) * n]
                        .iter()
                        .zip(v)
                        .map(|(a, b)| a * b)
                        .sum();
                }
            }
        }
    }

    /// Solves `(I - scale * M) z = rhs`.
    pub fn solve_shifted(&self, scale: f64, rhs: &[f64]) -> Result<Vec<f64>, Singular> {
        let n = self.dim();
        debug_assert_eq!(rhs.len(), n);
        match self {
            StructuredMatrix::Diagonal(d) => d
                .iter()
                .zip(rhs)
                .enumerate()
                .map(|(i, (&di, &ri))| {
                    let p = 1.0 - scale * di;
                    check_pivot(i, p, 1.0 + (scale * di).abs())?;
                    Ok(ri / p)
                })
                .collect(),
            StructuredMatrix::Tridiagonal { lower, diag, upper } => {
                let sub: Vec<f64> = lower.iter().map(|l| -scale * l).collect();
                let main: Vec<f64> = diag.iter().map(|d| 1.0 - scale * d).collect();
                let sup: Vec<f64> = upper.iter().map(|u| -scale * u).collect();
                solve_tridiagonal(&sub, &main, &sup, rhs)
            }
            StructuredMatrix::Dense { n, data } => {
                let mut a: Vec<f64> = data.iter().map(|m| -scale * m).collect();
                for i in 0..*n {
                    a[i * n + i] += 1.0;
                }
                lu_solve(*n, a, rhs.to_vec())
            }
        }
    }
}

fn check_pivot(index: usize, pivot: f64, magnitude: f64) -> Result<(), Singular> {
    if !pivot.is_finite() || pivot.abs() <= PIVOT_TOL * magnitude {
        Err(Singular {
            pivot: index,
            value: pivot,
        })
    } else {
        Ok(())
    }
}

/// Forward elimination / back substitution without pivoting.
///
/// `sub[i]` couples row `i+1` to column `i`, `sup[i]` couples row `i` to
/// column `i+1`.
pub fn solve_tridiagonal(
    sub: &[f64],
    main: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, Singular> {
    let n = main.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = main[0];
    check_pivot(0, pivot, row_magnitude(sub, main, sup, 0))?;
    if n > 1 {
        c[0] = sup[0] / pivot;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = main[i] - sub[i - 1] * c[i - 1];
        check_pivot(i, pivot, row_magnitude(sub, main, sup, i))?;
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

fn row_magnitude(sub: &[f64], main: &[f64], sup: &[f64], i: usize) -> f64 {
    let mut m = main[i].abs();
    if i > 0 {
        m += sub[i - 1].abs();
    }
    if i < sup.len() {
        m += sup[i].abs();
    }
    m
}

/// Dense LU with partial pivoting; `a` is row-major `n x n`.
pub fn lu_solve(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>, Singular> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        check_pivot(k, if pmax.is_finite() { pmax } else { f64::NAN }, scale)?;
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for i in k + 1..n {
            let factor = a[i * n + k] / piv;
            if factor != 0.0 {
                for j in k..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
                b[i] -= factor * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[k * n + j] * b[j];
        }
        b[k] = acc / a[k * n + k];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_shifted(m: &StructuredMatrix, scale: f64) -> Vec<f64> {
        let n = m.dim();
        let mut a: Vec<f64> = m.to_dense().iter().map(|v| -scale * v).collect();
        for i in 0..n {
            a[i * n + i] += 1.0;
        }
        a
    }

    #[test]
    fn diagonal_solve_is_componentwise() {
        let m = StructuredMatrix::Diagonal(vec![-2.0, -4.0]);
        let z = m.solve_shifted(0.5, &[2.0, 3.0]).unwrap();
        assert_eq!(z, vec![1.0, 1.0]);
    }

    #[test]
    fn tridiagonal_matches_dense_lu() {
        let m = StructuredMatrix::Tridiagonal {
            lower: vec![0.3, -1.2, 0.7],
            diag: vec![-4.0, -3.0, -5.5, -2.0],
            upper: vec![1.1, 0.4, -0.9],
        };
        let rhs = [1.0, -2.0, 0.5, 3.0];
        let z = m.solve_shifted(0.37, &rhs).unwrap();
        let zd = lu_solve(4, dense_shifted(&m, 0.37), rhs.to_vec()).unwrap();
        for (a, b) in z.iter().zip(&zd) {
            assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn singular_diagonal_shift_detected() {
        // h * mu = 2 makes 1 - (h/2) mu vanish
        let m = StructuredMatrix::Diagonal(vec![-1.0, 2.0]);
        let err = m.solve_shifted(0.5, &[1.0, 1.0]).unwrap_err();
        assert_eq!(err.pivot, 1);
    }

    #[test]
    fn lu_pivots_and_detects_singularity() {
        let z = lu_solve(2, vec![0.0, 1.0, 1.0, 0.0], vec![2.0, 3.0]).unwrap();
        assert_eq!(z, vec![3.0, 2.0]);
        assert!(lu_solve(2, vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn mul_vec_agrees_with_dense() {
        let m = StructuredMatrix::Tridiagonal {
            lower: vec![1.0, 2.0],
            diag: vec![3.0, 4.0, 5.0],
            upper: vec![6.0, 7.0],
        };
        let v = [1.0, -1.0, 2.0];
        let mut out = [0.0; 3];
        m.mul_vec(&v, &mut out);
        let d = StructuredMatrix::dense(3, m.to_dense());
        let mut out2 = [0.0; 3];
        d.mul_vec(&v, &mut out2);
        assert_eq!(out, out2);
        assert_eq!(out, [3.0 - 6.0, 1.0 - 4.0 + 14.0, -2.0 + 10.0]);
    }
}
