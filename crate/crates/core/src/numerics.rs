//! Summation, dense helpers and small quadrature rules.

use faer::linalg::solvers::Llt;
use faer::prelude::Solve;
use faer::{Mat, MatRef, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Neumaier-compensated sum. Order of summation is fixed.
pub fn sum(xs: &[f64]) -> f64 {
    sum_iter(xs.iter().copied())
}

pub fn sum_iter(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_iter(a.iter().zip(b).map(|(x, y)| x * y))
}

/// `A x` with rows computed in parallel; each row sum is sequential so the
/// result does not depend on the thread count.
pub fn matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let m = a.ncols();
    assert_eq!(m, x.len());
    (0..n)
        .into_par_iter()
        .map(|i| sum_iter((0..m).map(|j| a[(i, j)] * x[j])))
        .collect()
}

/// Quadratic form `x' A y`.
pub fn bilinear(a: MatRef<'_, f64>, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &matvec(a, y))
}

/// `A x` for a symmetric matrix using contiguous columns.
pub fn symv(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    (0..n)
        .into_par_iter()
        .map(|i| fast_dot(a.col_as_slice(i), x))
        .collect()
}

/// Plain dot product with four fixed accumulators.
pub fn fast_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Dense symmetric matrix from an entry function, filled in parallel by column.
pub fn symmetric_from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Mat<f64> {
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| (0..n).map(|i| if i <= j { f(i, j) } else { 0.0 }).collect())
        .collect();
    let mut m = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            m[(i, j)] = cols[j][i];
            m[(j, i)] = cols[j][i];
        }
    }
    m
}

pub fn matrix_from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Mat<f64> {
    let data: Vec<Vec<f64>> = (0..cols)
        .into_par_iter()
        .map(|j| (0..rows).map(|i| f(i, j)).collect())
        .collect();
    Mat::from_fn(rows, cols, |i, j| data[j][i])
}

pub const DENSE_LIMIT_BYTES: usize = 2_000_000_000;

pub fn check_dense(rows: usize, cols: usize) -> Result<()> {
    let bytes = rows.saturating_mul(cols).saturating_mul(8);
    if bytes > DENSE_LIMIT_BYTES {
        return Err(Error::MemoryBound {
            nodes: rows.max(cols),
            bytes,
            limit: DENSE_LIMIT_BYTES,
        });
    }
    Ok(())
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub struct Cholesky {
    llt: Llt<f64>,
    n: usize,
}

impl Cholesky {
    pub fn new(a: MatRef<'_, f64>, what: &str) -> Result<Self> {
        let llt = a
            .llt(Side::Lower)
            .map_err(|e| Error::NotPositiveDefinite(format!("{what}: {e:?}")))?;
        Ok(Cholesky { llt, n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        x.col_as_slice(0).to_vec()
    }

    pub fn solve_mat(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        self.llt.solve(b)
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &Mat<f64>) -> Result<f64> {
    let ev = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Infeasible(format!("eigenvalue solver failed: {e:?}")))?;
    Ok(ev.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Ordinary least-squares line fit. Returns slope, intercept and the
/// standard error of the slope.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = sum(x) / n;
    let my = sum(y) / n;
    let sxx = sum_iter(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = sum_iter(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let resid = sum_iter(
        x.iter()
            .zip(y)
            .map(|(a, b)| (b - icpt - slope * a).powi(2)),
    );
    let se = if x.len() > 2 {
        (resid / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, icpt, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(&xs), 2.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_solves() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let c = Cholesky::new(a.as_ref(), "test").unwrap();
        let x = c.solve(&[6.0, 6.0, 6.0]);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn line_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, i, se) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (i - 1.0).abs() < 1e-14 && se < 1e-12);
    }
}
