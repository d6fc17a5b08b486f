//! Non-negative least squares in energy form: minimise `x'Kx/2 - b'x` over `x >= 0`
//! for symmetric positive-definite `K`.

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{fast_dot, symv, Cholesky};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NnlsMethod {
    Unconstrained,
    ActiveSet,
    ProjectedGradient,
}

#[derive(Debug, Clone)]
pub struct NnlsOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method: NnlsMethod,
    /// max_i |min(x_i, g_i)| relative to max |b|.
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NnlsSettings {
    pub active_set_iterations: usize,
    pub gradient_iterations: usize,
    pub tolerance: f64,
}

impl Default for NnlsSettings {
    fn default() -> Self {
        NnlsSettings {
            active_set_iterations: 60,
            gradient_iterations: 20_000,
            tolerance: 1e-10,
        }
    }
}

pub fn kkt_residual(k: &Mat<f64>, b: &[f64], x: &[f64]) -> f64 {
    let kx = symv(k, x);
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    kx.iter()
        .zip(b)
        .zip(x)
        .map(|((kx, b), x)| x.min(kx - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Solves with the factor of `K`, falling back from the unconstrained
/// solution to a primal-dual active set method and finally to projected
/// gradients.
pub fn solve(k: &Mat<f64>, chol: &Cholesky, b: &[f64], settings: &NnlsSettings) -> Result<NnlsOutcome> {
    let x0 = chol.solve(b);
    if x0.iter().all(|v| *v >= 0.0) {
        let r = kkt_residual(k, b, &x0);
        return Ok(NnlsOutcome {
            x: x0,
            iterations: 0,
            converged: true,
            method: NnlsMethod::Unconstrained,
            kkt_residual: r,
        });
    }
    let guess: Vec<bool> = x0.iter().map(|v| *v < 0.0).collect();
    if let Some(out) = active_set(k, chol, b, &x0, guess, settings)? {
        return Ok(out);
    }
    let start: Vec<f64> = x0.iter().map(|v| v.max(0.0)).collect();
    let pg = projected_gradient(k, b, &start, settings);
    // Restart the active set iteration from the gradient method's zero set.
    let kx = symv(k, &pg.x);
    let guess: Vec<bool> = (0..b.len()).map(|i| pg.x[i] == 0.0 && kx[i] > b[i]).collect();
    if let Some(out) = active_set(k, chol, b, &x0, guess, settings)? {
        if out.kkt_residual <= pg.kkt_residual {
            return Ok(out);
        }
    }
    Ok(pg)
}

/// Primal-dual active set iteration. Free-set solves reuse the full factor
/// through a Schur complement on the active set. Returns `None` if the
/// active set keeps changing.
fn active_set(
    k: &Mat<f64>,
    chol: &Cholesky,
    b: &[f64],
    x0: &[f64],
    mut in_active: Vec<bool>,
    settings: &NnlsSettings,
) -> Result<Option<NnlsOutcome>> {
    let n = b.len();
    // Columns of K^{-1} for indices that have ever been active.
    let mut zcols: Vec<Option<Vec<f64>>> = vec![None; n];
    let max_active = (n / 3).max(n.min(400));
    for it in 1..=settings.active_set_iterations {
        let active: Vec<usize> = (0..n).filter(|&i| in_active[i]).collect();
        if active.len() > max_active {
            return Ok(None);
        }
        let missing: Vec<usize> = active.iter().copied().filter(|&i| zcols[i].is_none()).collect();
        if !missing.is_empty() {
            let e = Mat::from_fn(n, missing.len(), |r, c| if r == missing[c] { 1.0 } else { 0.0 });
            let z = chol.solve_mat(e.as_ref());
            for (c, &i) in missing.iter().enumerate() {
                zcols[i] = Some(z.col_as_slice(c).to_vec());
            }
        }
        let m = active.len();
        let mut x = x0.to_vec();
        let mut mu = vec![0.0; m];
        if m > 0 {
            let s = Mat::from_fn(m, m, |r, c| zcols[active[c]].as_ref().unwrap()[active[r]]);
            let sc = Cholesky::new(s.as_ref(), "active-set Schur complement")?;
            let rhs: Vec<f64> = active.iter().map(|&i| x0[i]).collect();
            mu = sc.solve(&rhs);
            for (c, &j) in active.iter().enumerate() {
                let z = zcols[j].as_ref().unwrap();
                for i in 0..n {
                    x[i] -= mu[c] * z[i];
                }
            }
            for &i in &active {
                x[i] = 0.0;
            }
        }
        // Gradient is zero on the free set and -mu on the active set.
        let mut changed = false;
        let mut next = vec![false; n];
        for i in 0..n {
            next[i] = if in_active[i] {
                let c = active.binary_search(&i).unwrap();
                -mu[c] > 0.0
            } else {
                x[i] < 0.0
            };
            changed |= next[i] != in_active[i];
        }
        if !changed {
            let r = kkt_residual(k, b, &x);
            return Ok(Some(NnlsOutcome {
                x,
                iterations: it,
                converged: true,
                method: NnlsMethod::ActiveSet,
                kkt_residual: r,
            }));
        }
        in_active = next;
    }
    Ok(None)
}

/// Projected gradient with Barzilai–Borwein steps and exact line search
/// along the projected direction.
pub fn projected_gradient(k: &Mat<f64>, b: &[f64], start: &[f64], settings: &NnlsSettings) -> NnlsOutcome {
    let n = b.len();
    let mut x: Vec<f64> = start.iter().map(|v| v.max(0.0)).collect();
    let kx = symv(k, &x);
    let mut g: Vec<f64> = kx.iter().zip(b).map(|(a, c)| a - c).collect();
    let dmax = (0..n).map(|i| k[(i, i)]).fold(0.0f64, f64::max);
    let mut step = 1.0 / dmax.max(1e-300);
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut obj = 0.5 * fast_dot(&x, &kx) - fast_dot(b, &x);
    let mut iterations = 0;
    let mut converged = false;
    let mut d = vec![0.0; n];
    for it in 1..=settings.gradient_iterations {
        iterations = it;
        let mut pg: f64 = 0.0;
        for i in 0..n {
            d[i] = (x[i] - step * g[i]).max(0.0) - x[i];
            pg = pg.max(x[i].min(g[i]).abs());
        }
        if pg / scale <= settings.tolerance {
            converged = true;
            break;
        }
        let kd = symv(k, &d);
        let dkd = fast_dot(&d, &kd);
        let gd = fast_dot(&g, &d);
        if dkd <= 0.0 || gd >= 0.0 {
            converged = pg / scale <= 1e3 * settings.tolerance;
            break;
        }
        let t = (-gd / dkd).min(1.0);
        for i in 0..n {
            x[i] = (x[i] + t * d[i]).max(0.0);
            g[i] += t * kd[i];
        }
        let new_obj = obj + t * gd + 0.5 * t * t * dkd;
        let decrease = (obj - new_obj).abs() / obj.abs().max(1e-300);
        obj = new_obj;
        step = (t * fast_dot(&d, &d)) / (t * dkd).max(1e-300);
        if decrease == 0.0 && it > 10 {
            break;
        }
    }
    let r = kkt_residual(k, b, &x);
    NnlsOutcome {
        x,
        iterations,
        converged: converged || r <= 1e3 * settings.tolerance,
        method: NnlsMethod::ProjectedGradient,
        kkt_residual: r,
    }
}

/// Checks convergence and converts failures into errors.
pub fn require_converged(out: NnlsOutcome, what: &'static str) -> Result<NnlsOutcome> {
    if out.converged {
        Ok(out)
    } else {
        Err(Error::NonConvergence {
            what,
            iterations: out.iterations,
            residual: out.kkt_residual,
        })
    }
}
