//! Optimality certificates for the capped-simplex problem: the weighted
//! potential `W = Gx + f` must be at least `w` where `x` is below its cap and
//! at most `w` where `x` is positive.

use serde::Serialize;

use crate::numerics::{fast_dot, sum};
use crate::solver::qp::CappedSimplexQp;

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// Constant the violations are measured against.
    pub w_primary: f64,
    /// Threshold of the linearised problem, filled greedily by increasing `W`.
    pub w_duality: f64,
    /// `<W, u - x> / (u - x)(total)`; only for bounded constraints.
    pub w_complement_average: Option<f64>,
    /// `<W, x>`.
    pub w_support_average: f64,
    /// Max of `(w - W_i)+` over nodes below their cap, relative to `|w|`.
    pub lower_violation: f64,
    /// Max of `(W_i - w)+` over nodes with positive mass, relative to `|w|`.
    pub upper_violation: f64,
    /// `<W, x>` minus the linearised minimum, relative to `|w|`.
    pub gap: f64,
    /// Whether some node sits at its cap.
    pub cap_active: bool,
}

impl CertificateReport {
    pub fn max_violation(&self) -> f64 {
        self.lower_violation.max(self.upper_violation)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_violation() <= tolerance
    }
}

/// Certificate of `x` for the problem, against `w` if given and the duality
/// threshold otherwise.
pub fn certify(qp: &CappedSimplexQp<'_>, x: &[f64], w: Option<f64>) -> CertificateReport {
    let n = x.len();
    let wp = qp.weighted_potential(x);
    let cap = |i: usize| qp.upper.map_or(f64::INFINITY, |u| u[i]);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| wp[a].total_cmp(&wp[b]).then(a.cmp(&b)));
    let mut left = 1.0;
    let mut w_duality = wp[order[0]];
    let mut lp = 0.0;
    for &i in &order {
        let take = cap(i).min(left);
        lp += take * wp[i];
        left -= take;
        w_duality = wp[i];
        if left <= 0.0 {
            break;
        }
    }
    let w_support_average = fast_dot(&wp, x);
    let w_complement_average = qp.upper.map(|u| {
        let slack: Vec<f64> = (0..n).map(|i| u[i] - x[i]).collect();
        fast_dot(&wp, &slack) / sum(&slack)
    });
    let w_primary = w.unwrap_or(w_duality);
    let scale = w_primary.abs().max(1e-300);
    let mut lower: f64 = 0.0;
    let mut upper: f64 = 0.0;
    let mut cap_active = false;
    for i in 0..n {
        if x[i] < cap(i) {
            lower = lower.max(w_primary - wp[i]);
        } else {
            cap_active = true;
        }
        if x[i] > 0.0 {
            upper = upper.max(wp[i] - w_primary);
        }
    }
    CertificateReport {
        w_primary,
        w_duality,
        w_complement_average,
        w_support_average,
        lower_violation: lower.max(0.0) / scale,
        upper_violation: upper.max(0.0) / scale,
        gap: (w_support_average - lp).max(0.0) / scale,
        cap_active,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    #[test]
    fn optimal_point_of_diagonal_problem() {
        // Minimiser of sum d_i x_i^2 on the simplex has x_i proportional to 1/d_i.
        let d = [1.0, 2.0, 4.0];
        let g = Mat::from_fn(3, 3, |i, j| if i == j { d[i] } else { 0.0 });
        let f = vec![0.0; 3];
        let qp = CappedSimplexQp { g: &g, f: &f, upper: None };
        let s: f64 = d.iter().map(|v| 1.0 / v).sum();
        let x: Vec<f64> = d.iter().map(|v| 1.0 / v / s).collect();
        let c = certify(&qp, &x, None);
        assert!(c.max_violation() < 1e-14);
        assert!((c.w_support_average - 1.0 / s).abs() < 1e-14);
        assert!((c.w_duality - 1.0 / s).abs() < 1e-14);
        assert!(c.gap < 1e-14);
    }

    #[test]
    fn moved_mass_is_flagged() {
        let d = [1.0, 2.0, 4.0];
        let g = Mat::from_fn(3, 3, |i, j| if i == j { d[i] } else { 0.0 });
        let f = vec![0.0; 3];
        let qp = CappedSimplexQp { g: &g, f: &f, upper: None };
        let x = [0.6, 0.3, 0.1];
        let c = certify(&qp, &x, None);
        assert!(c.upper_violation > 0.1);
    }
}
