//! Riesz kernels, diagonal policies and the analytic half-space Green kernel.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::{dist, dist2, reflect, Carrier, Point, PointCloud};
use crate::numerics::{check_dense, gauss_legendre, matrix_from_fn, symmetric_from_fn};

/// Ambient dimension and Riesz order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub n: usize,
    pub alpha: f64,
}

impl KernelParams {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::param(format!("dimension must be at least 3, got {n}")));
        }
        if n != 3 {
            return Err(Error::param("only three-dimensional geometry is implemented"));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::param(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        Ok(KernelParams { n, alpha })
    }

    pub fn newtonian() -> Self {
        KernelParams { n: 3, alpha: 2.0 }
    }

    pub fn is_newtonian(&self) -> bool {
        self.alpha == 2.0
    }

    /// Power `s` with kernel `r^-s`.
    pub fn decay(&self) -> f64 {
        self.n as f64 - self.alpha
    }

    /// Kernel of half the order, used for weak energies.
    pub fn half(&self) -> KernelParams {
        KernelParams {
            n: self.n,
            alpha: 0.5 * self.alpha,
        }
    }

    /// Constant `C` with `k_alpha = (1/C) k_{alpha/2} * k_{alpha/2}`.
    pub fn composition_constant(&self) -> f64 {
        let n = self.n as f64;
        let a = 0.5 * self.alpha;
        PI.powf(0.5 * n) * gamma(0.5 * a).powi(2) * gamma(0.5 * (n - self.alpha))
            / (gamma(0.5 * (n - a)).powi(2) * gamma(0.5 * self.alpha))
    }
}

/// `r^-s` with fast paths for the Newtonian powers.
#[inline]
pub fn power_kernel(r2: f64, s: f64) -> f64 {
    if s == 1.0 {
        1.0 / r2.sqrt()
    } else if s == 2.0 {
        1.0 / r2
    } else {
        r2.powf(-0.5 * s)
    }
}

/// `|x - y|^(alpha - n)`; coincident points are an error.
pub fn riesz(x: &Point, y: &Point, p: &KernelParams) -> Result<f64> {
    let r2 = dist2(x, y);
    if r2 == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(power_kernel(r2, p.decay()))
}

/// The kernel of order `alpha / 2`.
pub fn half_riesz(x: &Point, y: &Point, p: &KernelParams) -> Result<f64> {
    riesz(x, y, &p.half())
}

/// What to put on the diagonal of a kernel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalPolicy {
    /// Mean of the kernel over pairs of points in the cell (a disc for
    /// surfaces, a ball for solids).
    #[default]
    CellAverage,
    /// Potential of the uniform cell at its own centre.
    CenterValue,
    /// Zero self-interaction, for genuine point masses.
    Atomic,
}

/// Mean of `d^-s` for `d` the distance between two uniform points of the
/// unit disc (`dim = 2`) or unit ball (`dim = 3`).
fn unit_cell_pair_mean(s: f64, dim: usize) -> f64 {
    let pdf = |d: f64| {
        if dim == 2 {
            4.0 * d / PI * ((0.5 * d).acos() - 0.5 * d * (1.0 - 0.25 * d * d).max(0.0).sqrt())
        } else {
            3.0 / 16.0 * d * d * (d - 2.0).powi(2) * (d + 4.0)
        }
    };
    let (x, w) = gauss_legendre(64);
    let k = 4.0;
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let u = 0.5 * (xi + 1.0);
        // d = u^k on [0, 1] tames the power singularity at 0.
        let d = u.powf(k);
        acc += pdf(d) * d.powf(-s) * k * u.powf(k - 1.0) * 0.5 * wi;
        // d = 2 - u^2 on [1, 2] smooths the square-root edge at 2.
        let d = 2.0 - u * u;
        acc += pdf(d) * d.powf(-s) * 2.0 * u * 0.5 * wi;
    }
    acc
}

/// Diagonal entry for a cell of radius `h`.
pub fn self_term(h: f64, carrier: Carrier, p: &KernelParams, policy: DiagonalPolicy) -> f64 {
    let s = p.decay();
    let dim = match carrier {
        Carrier::Volume => 3,
        _ => 2,
    };
    match policy {
        DiagonalPolicy::Atomic => 0.0,
        DiagonalPolicy::CellAverage => unit_cell_pair_mean(s, dim) * h.powf(-s),
        DiagonalPolicy::CenterValue => center_value(h, dim, s),
    }
}

fn center_value(h: f64, dim: usize, s: f64) -> f64 {
    dim as f64 / (dim as f64 - s) * h.powf(-s)
}

/// Kernel between a point and a cell of radius `h` at distance `r`,
/// bending smoothly from the centre value at 0 to `h^-s` at `r = h`.
#[inline]
pub fn smoothed_kernel(r2: f64, h: f64, s: f64, carrier: Carrier) -> f64 {
    if r2 >= h * h {
        return power_kernel(r2, s);
    }
    let dim = if carrier == Carrier::Volume { 3 } else { 2 };
    let c0 = dim as f64 / (dim as f64 - s);
    h.powf(-s) * (c0 - (c0 - 1.0) * r2 / (h * h))
}

/// `r^-s` averaged over a ball of radius `h` about one end point,
/// tabulated in `r / h`.
#[derive(Debug, Clone)]
pub struct BallAveragedKernel {
    s: f64,
    table: Vec<f64>,
}

const BALL_TABLE_MAX: f64 = 4.0;
const BALL_TABLE_SIZE: usize = 2049;

impl BallAveragedKernel {
    pub fn new(s: f64) -> Self {
        let (x, w) = gauss_legendre(48);
        // Mean of |x - y|^-s over the sphere |y| = t, for |x| = r.
        let sphere = |r: f64, t: f64| {
            if r == 0.0 {
                t.powf(-s)
            } else if s == 2.0 {
                ((t + r) / (t - r).abs()).ln() / (2.0 * r * t)
            } else {
                ((t + r).powf(2.0 - s) - (t - r).abs().powf(2.0 - s)) / ((2.0 - s) * 2.0 * r * t)
            }
        };
        // 3 * integral over t in [0, 1] of t^2 * sphere(r, t), split at t = r.
        let radial = |r: f64| {
            let mut acc = 0.0;
            let mut seg = |a: f64, b: f64| {
                if b <= a {
                    return;
                }
                for (xi, wi) in x.iter().zip(&w) {
                    let t = a + (b - a) * 0.5 * (xi + 1.0);
                    acc += 0.5 * (b - a) * wi * t * t * sphere(r, t);
                }
            };
            if r > 0.0 && r < 1.0 {
                seg(0.0, r);
                seg(r, 1.0);
            } else {
                seg(0.0, 1.0);
            }
            3.0 * acc
        };
        let table = (0..BALL_TABLE_SIZE)
            .map(|i| {
                let u = BALL_TABLE_MAX * i as f64 / (BALL_TABLE_SIZE - 1) as f64;
                if u == 0.0 {
                    3.0 / (3.0 - s)
                } else {
                    radial(u)
                }
            })
            .collect();
        BallAveragedKernel { s, table }
    }

    pub fn decay(&self) -> f64 {
        self.s
    }

    /// Coefficient of the `h^2 r^-(s+2)` term in the far-field expansion.
    pub fn far_correction(&self) -> f64 {
        self.s * (self.s - 1.0) / 10.0
    }

    #[inline]
    pub fn eval(&self, r2: f64, h: f64) -> f64 {
        let u2 = r2 / (h * h);
        if u2 >= BALL_TABLE_MAX * BALL_TABLE_MAX {
            let c2 = self.s * (self.s - 1.0) * (self.s + 1.0) * (self.s + 2.0) / 280.0;
            return power_kernel(r2, self.s) * (1.0 + self.far_correction() / u2 + c2 / (u2 * u2));
        }
        let pos = u2.sqrt() / BALL_TABLE_MAX * (BALL_TABLE_SIZE - 1) as f64;
        let i = (pos as usize).min(BALL_TABLE_SIZE - 2);
        let f = pos - i as f64;
        (self.table[i] * (1.0 - f) + self.table[i + 1] * f) * h.powf(-self.s)
    }
}

/// Dense Riesz matrix of a cloud.
pub fn riesz_matrix(cloud: &PointCloud, p: &KernelParams, policy: DiagonalPolicy) -> Result<Mat<f64>> {
    let n = cloud.len();
    check_dense(n, n)?;
    let s = p.decay();
    if s >= cloud.carrier.dim() as f64 && cloud.carrier != Carrier::Atoms {
        return Err(Error::param(format!(
            "a {}-dimensional carrier has zero capacity for alpha = {}",
            cloud.carrier.dim(),
            p.alpha
        )));
    }
    let pol = if cloud.carrier == Carrier::Atoms {
        DiagonalPolicy::Atomic
    } else {
        policy
    };
    Ok(symmetric_from_fn(n, |i, j| {
        if i == j {
            self_term(cloud.spacing[i], cloud.carrier, p, pol)
        } else {
            power_kernel(dist2(&cloud.points[i], &cloud.points[j]), s)
        }
    }))
}

/// Riesz interaction between two different clouds, smoothed inside the
/// larger of the two cells.
pub fn riesz_cross_matrix(rows: &PointCloud, cols: &PointCloud, p: &KernelParams) -> Result<Mat<f64>> {
    check_dense(rows.len(), cols.len())?;
    let s = p.decay();
    let carrier = if rows.carrier == Carrier::Volume || cols.carrier == Carrier::Volume {
        Carrier::Volume
    } else {
        Carrier::Surface
    };
    Ok(matrix_from_fn(rows.len(), cols.len(), |i, j| {
        let h = rows.smoothing(i).max(cols.smoothing(j));
        smoothed_kernel(dist2(&rows.points[i], &cols.points[j]), h, s, carrier)
    }))
}

/// Riesz potential of weights on a cloud, evaluated off the nodes.
pub fn riesz_potential_at(cloud: &PointCloud, weights: &[f64], x: &Point, p: &KernelParams) -> f64 {
    let s = p.decay();
    let terms = cloud
        .points
        .iter()
        .zip(weights)
        .enumerate()
        .filter(|(_, (_, w))| **w != 0.0)
        .map(|(i, (y, w))| w * smoothed_kernel(dist2(x, y), cloud.smoothing(i), s, cloud.carrier));
    crate::numerics::sum_iter(terms)
}

/// Newtonian Green kernel of the half-space {x1 > 0}.
pub fn green_halfspace(x: &Point, y: &Point) -> Result<f64> {
    for z in [x, y] {
        if !(z[0] > 0.0) {
            return Err(Error::OutsideDomain { point: *z });
        }
    }
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(1.0 / r - 1.0 / dist(x, &reflect(y)))
}

/// Mean of `1/|z - c|` over a ball of radius `h` centred at `z`, with `c`
/// at distance `d`.
fn ball_mean_inverse(d: f64, h: f64) -> f64 {
    if d >= h {
        1.0 / d
    } else {
        (3.0 * h * h - d * d) / (2.0 * h * h * h)
    }
}

/// Dense matrix of the analytic half-space Green kernel.
pub fn green_halfspace_matrix(cloud: &PointCloud, policy: DiagonalPolicy) -> Result<Mat<f64>> {
    let n = cloud.len();
    check_dense(n, n)?;
    for x in &cloud.points {
        if !(x[0] > 0.0) {
            return Err(Error::OutsideDomain { point: *x });
        }
    }
    let p = KernelParams::newtonian();
    let pol = if cloud.carrier == Carrier::Atoms {
        DiagonalPolicy::Atomic
    } else {
        policy
    };
    Ok(symmetric_from_fn(n, |i, j| {
        let x = &cloud.points[i];
        if i == j {
            let image = match pol {
                DiagonalPolicy::Atomic => 1.0 / (2.0 * x[0]),
                _ => ball_mean_inverse(2.0 * x[0], cloud.spacing[i]),
            };
            self_term(cloud.spacing[i], cloud.carrier, &p, pol) - image
        } else {
            let y = &cloud.points[j];
            1.0 / dist(x, y) - 1.0 / dist(x, &reflect(y))
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newtonian_composition_constant_is_pi_cubed() {
        let c = KernelParams::newtonian().composition_constant();
        assert!((c - PI.powi(3)).abs() < 1e-10 * c);
    }

    #[test]
    fn unit_disc_and_ball_pair_means() {
        // Mean inverse distance: 16/(3 pi) on the unit disc, 6/5 in the unit ball.
        assert!((unit_cell_pair_mean(1.0, 2) - 16.0 / (3.0 * PI)).abs() < 1e-6);
        assert!((unit_cell_pair_mean(1.0, 3) - 1.2).abs() < 1e-6);
        // Probabilities integrate to one.
        assert!((unit_cell_pair_mean(0.0, 2) - 1.0).abs() < 1e-8);
        assert!((unit_cell_pair_mean(0.0, 3) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kernel_params_validation() {
        assert!(KernelParams::new(3, 0.0).is_err());
        assert!(KernelParams::new(3, 2.5).is_err());
        assert!(KernelParams::new(2, 1.0).is_err());
        assert!(KernelParams::new(3, 1.5).is_ok());
    }

    #[test]
    fn riesz_rejects_diagonal() {
        let p = KernelParams::newtonian();
        assert!(matches!(
            riesz(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &p),
            Err(Error::SingularEvaluation)
        ));
        let v = riesz(&[0.0; 3], &[2.0, 0.0, 0.0], &KernelParams::new(3, 1.0).unwrap()).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn green_is_symmetric_positive_and_vanishes_on_boundary() {
        let x = [0.3, 0.1, -0.2];
        let y = [1.1, -0.4, 0.5];
        let a = green_halfspace(&x, &y).unwrap();
        let b = green_halfspace(&y, &x).unwrap();
        assert!((a - b).abs() < 1e-15 && a > 0.0);
        let near = green_halfspace(&[1e-9, 0.0, 0.0], &y).unwrap();
        assert!(near.abs() < 1e-8);
        assert!(green_halfspace(&[-0.1, 0.0, 0.0], &y).is_err());
    }

    #[test]
    fn ball_average_matches_closed_forms() {
        // Newtonian: (3 - u^2)/2 inside, 1/u outside.
        let k = BallAveragedKernel::new(1.0);
        for u in [0.0, 0.3, 0.77, 1.0, 1.9, 3.5, 6.0] {
            let exact = if u <= 1.0 { 0.5 * (3.0 - u * u) } else { 1.0 / u };
            assert!((k.eval(u * u * 0.04, 0.2) * 0.2 - exact).abs() < 1e-5, "{u}");
        }
        // s = 2 at the centre: 3 / h^2.
        let k2 = BallAveragedKernel::new(2.0);
        assert!((k2.eval(0.0, 0.5) - 12.0).abs() < 1e-9);
        // Continuity at the end of the table.
        let a = k2.eval(16.0 * (1.0 - 1e-9), 1.0);
        let b = k2.eval(16.0 * (1.0 + 1e-9), 1.0);
        assert!((a - b).abs() < 1e-4 * a);
    }

    #[test]
    fn smoothed_kernel_is_continuous_at_cell_edge() {
        let h = 0.3;
        let inside = smoothed_kernel(h * h * (1.0 - 1e-12), h, 1.0, Carrier::Surface);
        let outside = smoothed_kernel(h * h, h, 1.0, Carrier::Surface);
        assert!((inside - outside).abs() < 1e-9);
    }
}
