//! Minimise `x'Gx + 2 f'x` over `{0 <= x <= u, sum x = 1}` for symmetric
//! positive-definite `G`.

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{fast_dot, symv, Cholesky};
use crate::solver::certificate::{certify, CertificateReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpMethod {
    ActiveSet,
    ProjectedGradient,
    Saturated,
}

#[derive(Debug, Clone)]
pub enum QpStart {
    Uniform,
    /// All mass on one node.
    Vertex(usize),
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy)]
pub struct QpSettings {
    /// Gradient steps taken before the active-set phase.
    pub warmup: usize,
    pub active_set_iterations: usize,
    pub gradient_iterations: usize,
    /// Certificate violations relative to `|w|`.
    pub tolerance: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            warmup: 0,
            active_set_iterations: 100,
            gradient_iterations: 50_000,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpOutcome {
    pub x: Vec<f64>,
    /// Multiplier of the mass constraint.
    pub w: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: QpMethod,
    pub certificate: CertificateReport,
}

/// A quadratic program on the capped simplex.
#[derive(Debug, Clone, Copy)]
pub struct CappedSimplexQp<'a> {
    pub g: &'a Mat<f64>,
    pub f: &'a [f64],
    /// `None` means no upper bounds.
    pub upper: Option<&'a [f64]>,
}

impl CappedSimplexQp<'_> {
    fn n(&self) -> usize {
        self.f.len()
    }

    fn cap(&self, i: usize) -> f64 {
        self.upper.map_or(f64::INFINITY, |u| u[i])
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let gx = symv(self.g, x);
        fast_dot(x, &gx) + 2.0 * fast_dot(self.f, x)
    }

    /// Weighted potential `Gx + f`.
    pub fn weighted_potential(&self, x: &[f64]) -> Vec<f64> {
        let mut v = symv(self.g, x);
        for (a, b) in v.iter_mut().zip(self.f) {
            *a += b;
        }
        v
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.g.nrows() != n || self.g.ncols() != n {
            return Err(Error::param("quadratic program dimensions disagree"));
        }
        if self.f.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("external field must be finite at every node"));
        }
        if let Some(u) = self.upper {
            if u.len() != n {
                return Err(Error::param("constraint length differs from node count"));
            }
            if u.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::param("constraint values must be positive"));
            }
        }
        Ok(())
    }

    /// Euclidean projection onto the capped simplex by bisection on the shift.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let clamp = |t: f64| -> Vec<f64> { (0..n).map(|i| (y[i] - t).clamp(0.0, self.cap(i))).collect() };
        let mass = |t: f64| -> f64 { (0..n).map(|i| (y[i] - t).clamp(0.0, self.cap(i))).sum() };
        let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
        let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let umax = (0..n).map(|i| self.cap(i)).filter(|c| c.is_finite()).fold(1.0f64, f64::max);
        let mut lo = ymin - umax - 1.0;
        let mut hi = ymax;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mass(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Recompute the shift exactly on the free set found by bisection.
        let t = 0.5 * (lo + hi);
        let mut free_sum = 0.0;
        let mut free = 0usize;
        let mut capped = 0.0;
        for i in 0..n {
            let v = y[i] - t;
            if v >= self.cap(i) {
                capped += self.cap(i);
            } else if v > 0.0 {
                free_sum += y[i];
                free += 1;
            }
        }
        let t = if free > 0 {
            let exact = (free_sum + capped - 1.0) / free as f64;
            if (lo..=hi).contains(&exact) || (exact - t).abs() <= 1e-12 * (1.0 + t.abs()) {
                exact
            } else {
                t
            }
        } else {
            t
        };
        clamp(t)
    }

    fn start_point(&self, start: &QpStart) -> Result<Vec<f64>> {
        let n = self.n();
        let y = match start {
            QpStart::Uniform => vec![1.0 / n as f64; n],
            QpStart::Vertex(i) => {
                if *i >= n {
                    return Err(Error::param("vertex index out of range"));
                }
                let mut v = vec![0.0; n];
                v[*i] = 1.0;
                v
            }
            QpStart::Given(v) => {
                if v.len() != n {
                    return Err(Error::param("initial point has the wrong length"));
                }
                v.clone()
            }
        };
        Ok(self.project(&y))
    }

    pub fn solve(&self, start: &QpStart, settings: &QpSettings) -> Result<QpOutcome> {
        self.validate()?;
        let n = self.n();
        let total_cap: f64 = (0..n).map(|i| self.cap(i)).sum();
        if total_cap < 1.0 - 1e-12 {
            return Err(Error::Infeasible(format!(
                "total constraint mass {total_cap} is below 1"
            )));
        }
        if total_cap <= 1.0 + 1e-12 {
            // The only feasible point.
            let x: Vec<f64> = (0..n).map(|i| self.cap(i)).collect();
            let cert = certify(self, &x, None);
            return Ok(QpOutcome {
                objective: self.objective(&x),
                w: cert.w_duality,
                x,
                iterations: 0,
                converged: true,
                method: QpMethod::Saturated,
                certificate: cert,
            });
        }
        let mut x = self.start_point(start)?;
        let mut iterations = 0;
        if settings.warmup > 0 {
            let (xs, it) = self.gradient(&x, settings.warmup, settings.tolerance);
            x = xs;
            iterations += it;
        }
        if let Some((xa, w, it)) = self.active_set(&x, settings)? {
            return Ok(self.finish(xa, Some(w), iterations + it, QpMethod::ActiveSet, settings));
        }
        let (xs, it) = self.gradient(&x, settings.gradient_iterations, settings.tolerance);
        iterations += it;
        if let Some((xa, w, it)) = self.active_set(&xs, settings)? {
            return Ok(self.finish(xa, Some(w), iterations + it, QpMethod::ActiveSet, settings));
        }
        Ok(self.finish(xs, None, iterations, QpMethod::ProjectedGradient, settings))
    }

    fn finish(&self, x: Vec<f64>, w: Option<f64>, iterations: usize, method: QpMethod, settings: &QpSettings) -> QpOutcome {
        let cert = certify(self, &x, w);
        let converged = cert.max_violation() <= settings.tolerance;
        QpOutcome {
            objective: self.objective(&x),
            w: cert.w_primary,
            x,
            iterations,
            converged,
            method,
            certificate: cert,
        }
    }

    /// Projected gradient with Barzilai–Borwein steps and exact line search.
    fn gradient(&self, start: &[f64], budget: usize, tolerance: f64) -> (Vec<f64>, usize) {
        let n = self.n();
        let mut x = start.to_vec();
        let mut wp = self.weighted_potential(&x);
        let dmax = (0..n).map(|i| self.g[(i, i)]).fold(0.0f64, f64::max);
        let mut step = 0.5 / dmax.max(1e-300);
        let mut it = 0;
        while it < budget {
            it += 1;
            let y: Vec<f64> = (0..n).map(|i| x[i] - 2.0 * step * wp[i]).collect();
            let p = self.project(&y);
            let d: Vec<f64> = (0..n).map(|i| p[i] - x[i]).collect();
            let gd = 2.0 * fast_dot(&wp, &d);
            if gd >= 0.0 {
                break;
            }
            let gdir = symv(self.g, &d);
            let dgd = fast_dot(&d, &gdir);
            if dgd <= 0.0 {
                break;
            }
            let t = (-gd / (2.0 * dgd)).min(1.0);
            for i in 0..n {
                x[i] += t * d[i];
                wp[i] += t * gdir[i];
            }
            // Keep exact feasibility after the convex combination.
            if t == 1.0 {
                x.copy_from_slice(&p);
            }
            let dd = fast_dot(&d, &d);
            step = 0.5 * dd / dgd;
            if it % 25 == 0 && certify(self, &x, None).max_violation() <= tolerance {
                break;
            }
        }
        (x, it)
    }

    /// Primal-dual active set iteration on the lower and upper bounds. Returns
    /// the solution, its multiplier and the iteration count, or `None` if the
    /// sets keep changing.
    fn active_set(&self, x0: &[f64], settings: &QpSettings) -> Result<Option<(Vec<f64>, f64, usize)>> {
        #[derive(Clone, Copy, PartialEq, Eq)]
        enum Set {
            Free,
            Lower,
            Upper,
        }
        let n = self.n();
        let wp0 = self.weighted_potential(x0);
        let wd = certify(self, x0, None).w_duality;
        let mut sets: Vec<Set> = (0..n)
            .map(|i| {
                if x0[i] <= 0.0 && wp0[i] > wd {
                    Set::Lower
                } else if x0[i] >= self.cap(i) && wp0[i] < wd {
                    Set::Upper
                } else {
                    Set::Free
                }
            })
            .collect();
        for it in 1..=settings.active_set_iterations {
            let free: Vec<usize> = (0..n).filter(|&i| sets[i] == Set::Free).collect();
            if free.is_empty() {
                return Ok(None);
            }
            let mut x = vec![0.0; n];
            for i in 0..n {
                if sets[i] == Set::Upper {
                    x[i] = self.cap(i);
                }
            }
            let fixed_mass: f64 = x.iter().sum();
            // Right-hand side -f_F - G_FU u_U.
            let gu = symv(self.g, &x);
            let r: Vec<f64> = free.iter().map(|&i| -self.f[i] - gu[i]).collect();
            let gff = Mat::from_fn(free.len(), free.len(), |a, b| self.g[(free[a], free[b])]);
            let chol = Cholesky::new(gff.as_ref(), "free block of the Gauss problem")?;
            let a = chol.solve(&r);
            let b = chol.solve(&vec![1.0; free.len()]);
            let sb: f64 = b.iter().sum();
            let sa: f64 = a.iter().sum();
            let w = (1.0 - fixed_mass - sa) / sb;
            for (k, &i) in free.iter().enumerate() {
                x[i] = a[k] + w * b[k];
            }
            let wp = self.weighted_potential(&x);
            let slack = 1e-13 * w.abs().max(1e-300);
            let mut changed = false;
            for i in 0..n {
                let next = match sets[i] {
                    Set::Free if x[i] < 0.0 => Set::Lower,
                    Set::Free if x[i] > self.cap(i) => Set::Upper,
                    Set::Lower if wp[i] < w - slack => Set::Free,
                    Set::Upper if wp[i] > w + slack => Set::Free,
                    s => s,
                };
                changed |= next != sets[i];
                sets[i] = next;
            }
            if !changed {
                return Ok(Some((x, w, it)));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
        let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mut k = &a * a.transpose();
        for i in 0..n {
            k[(i, i)] += 0.2;
        }
        k
    }

    #[test]
    fn projection_is_feasible_and_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Mat::<f64>::identity(6, 6);
        let f = vec![0.0; 6];
        let u = vec![0.3, 0.5, 0.2, 1.0, 0.25, 0.4];
        let qp = CappedSimplexQp { g: &g, f: &f, upper: Some(&u) };
        for _ in 0..50 {
            let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = qp.project(&y);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            for i in 0..6 {
                assert!(p[i] >= 0.0 && p[i] <= u[i]);
            }
            let dp: f64 = (0..6).map(|i| (p[i] - y[i]).powi(2)).sum();
            // Any other feasible point is no closer.
            for _ in 0..20 {
                let z = qp.project(&(0..6).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
                let dz: f64 = (0..6).map(|i| (z[i] - y[i]).powi(2)).sum();
                assert!(dz >= dp - 1e-12);
            }
        }
    }

    #[test]
    fn active_set_and_gradient_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let n = 30;
            let g = random_spd(n, &mut rng);
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..0.2)).collect();
            let qp = CappedSimplexQp { g: &g, f: &f, upper: Some(&u) };
            let a = qp.solve(&QpStart::Uniform, &QpSettings::default()).unwrap();
            assert!(a.converged, "{:?}", a.certificate);
            let (xg, _) = qp.gradient(&qp.project(&vec![0.0; n]), 200_000, 1e-12);
            assert!(qp.objective(&xg) >= a.objective - 1e-9);
            assert!((a.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn starts_reach_the_same_minimiser() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let g = random_spd(n, &mut rng);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let qp = CappedSimplexQp { g: &g, f: &f, upper: None };
        let s = QpSettings {
            warmup: 20,
            ..Default::default()
        };
        let a = qp.solve(&QpStart::Uniform, &s).unwrap();
        let b = qp.solve(&QpStart::Vertex(7), &s).unwrap();
        assert!(a.converged && b.converged);
        let d = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(d < 1e-10);
    }

    #[test]
    fn infeasible_and_saturated_constraints() {
        let g = Mat::<f64>::identity(3, 3);
        let f = vec![0.0; 3];
        let u = vec![0.2, 0.3, 0.4];
        let qp = CappedSimplexQp { g: &g, f: &f, upper: Some(&u) };
        assert!(matches!(qp.solve(&QpStart::Uniform, &QpSettings::default()), Err(Error::Infeasible(_))));
        let u = vec![0.2, 0.3, 0.5];
        let qp = CappedSimplexQp { g: &g, f: &f, upper: Some(&u) };
        let out = qp.solve(&QpStart::Uniform, &QpSettings::default()).unwrap();
        assert_eq!(out.method, QpMethod::Saturated);
        assert_eq!(out.x, u);
    }
}
