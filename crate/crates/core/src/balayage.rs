//! Sweeping measures from a domain onto its discretised complement.

use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    dist2, fibonacci_directions, Carrier, DiscreteMeasure, Domain, DomainSpec, Point, PointCloud,
    SignedDiscreteMeasure, GOLDEN_ANGLE,
};
use crate::kernels::{riesz_matrix, smoothed_kernel, DiagonalPolicy, KernelParams};
use crate::nnls::{self, NnlsMethod, NnlsSettings};
use crate::numerics::{check_dense, matrix_from_fn, sum_iter, Cholesky};

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub swept: DiscreteMeasure,
    /// Largest relative potential mismatch at off-node probes of the complement.
    pub potential_residual: f64,
    pub mass_in: f64,
    pub mass_out: f64,
    /// Bound on the neglected far-field potential beyond the truncation radius.
    pub tail_bound: f64,
    pub iterations: usize,
    pub method: NnlsMethod,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassLoss {
    pub mass_in: f64,
    pub mass_out: f64,
    pub deficit: f64,
    pub truncation_radius: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SuperpositionReport {
    pub atoms: usize,
    /// Max weight difference relative to the largest joint weight.
    pub max_discrepancy: f64,
}

/// Factorised complement cloud, reusable across many sweeps.
pub struct Sweeper {
    pub domain: DomainSpec,
    pub a2: Arc<PointCloud>,
    pub params: KernelParams,
    k22: Mat<f64>,
    chol: Cholesky,
    probes: Vec<Point>,
    pub settings: NnlsSettings,
}

impl std::fmt::Debug for Sweeper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sweeper")
            .field("domain", &self.domain)
            .field("nodes", &self.a2.len())
            .field("params", &self.params)
            .finish()
    }
}

impl Sweeper {
    pub fn new(domain: DomainSpec, a2: Arc<PointCloud>, params: KernelParams) -> Result<Self> {
        for x in &a2.points {
            // Nodes meshed on the boundary may land a rounding error inside.
            let slack = 1e-9 * (1.0 + x.iter().map(|c| c.abs()).fold(0.0, f64::max));
            if domain.domain.contains(x) && domain.domain.distance_to_boundary(x) > slack {
                return Err(Error::param(format!(
                    "complement node {x:?} lies inside the domain"
                )));
            }
        }
        let k22 = riesz_matrix(&a2, &params, DiagonalPolicy::CellAverage)?;
        let chol = Cholesky::new(k22.as_ref(), "complement kernel matrix")?;
        let probes = complement_probes(&domain, &a2, 64);
        Ok(Sweeper {
            domain,
            a2,
            params,
            k22,
            chol,
            probes,
            settings: NnlsSettings::default(),
        })
    }

    /// Kernel matrix of the complement nodes.
    pub fn complement_matrix(&self) -> &Mat<f64> {
        &self.k22
    }

    pub fn probes(&self) -> &[Point] {
        &self.probes
    }

    /// Potential of the weights at the complement nodes.
    fn load(&self, mu: &DiscreteMeasure) -> Result<Vec<f64>> {
        if Arc::ptr_eq(&mu.cloud, &self.a2) {
            return Ok(crate::numerics::symv(&self.k22, &mu.weights));
        }
        let s = self.params.decay();
        let carrier = combined_carrier(&self.a2, &mu.cloud);
        let support = mu.support();
        Ok((0..self.a2.len())
            .into_par_iter()
            .map(|i| {
                let x = &self.a2.points[i];
                sum_iter(support.iter().map(|&k| {
                    let h = self.a2.smoothing(i).max(mu.cloud.smoothing(k));
                    mu.weights[k] * smoothed_kernel(dist2(x, &mu.cloud.points[k]), h, s, carrier)
                }))
            })
            .collect())
    }

    pub fn sweep(&self, mu: &DiscreteMeasure) -> Result<SweepResult> {
        if !Arc::ptr_eq(&mu.cloud, &self.a2) {
            for k in mu.support() {
                if !self.domain.domain.contains(&mu.cloud.points[k]) {
                    return Err(Error::OutsideDomain { point: mu.cloud.points[k] });
                }
            }
        }
        let b = self.load(mu)?;
        let out = nnls::require_converged(
            nnls::solve(&self.k22, &self.chol, &b, &self.settings)?,
            "balayage projection",
        )?;
        let swept = DiscreteMeasure::new(self.a2.clone(), out.x)?;
        let potential_residual = self.residual(mu, &swept);
        let mass_in = mu.total_mass();
        let mass_out = swept.total_mass();
        let tail_bound = if self.domain.domain.complement_unbounded() {
            mass_in * self.domain.truncation_radius.powf(-self.params.decay())
        } else {
            0.0
        };
        Ok(SweepResult {
            swept,
            potential_residual,
            mass_in,
            mass_out,
            tail_bound,
            iterations: out.iterations,
            method: out.method,
            kkt_residual: out.kkt_residual,
        })
    }

    /// Potential mismatch at the probe pattern, relative to the largest
    /// potential of `mu` there.
    pub fn residual(&self, mu: &DiscreteMeasure, swept: &DiscreteMeasure) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for x in &self.probes {
            let a = potential(mu, x, &self.params);
            let b = potential(swept, x, &self.params);
            worst = worst.max((a - b).abs());
            scale = scale.max(a.abs());
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn sweep_signed(&self, nu: &SignedDiscreteMeasure) -> Result<(SweepResult, SweepResult)> {
        Ok((self.sweep(&nu.plus)?, self.sweep(&nu.minus)?))
    }

    /// Swept unit masses at every node of `cloud`, as columns. Columns with
    /// negative entries are re-solved on the cone.
    pub fn sweep_columns(&self, cloud: &PointCloud) -> Result<Mat<f64>> {
        let (b, mut x) = self.linear_columns(cloud)?;
        let negative: Vec<usize> = (0..cloud.len())
            .filter(|&j| x.col_as_slice(j).iter().any(|v| *v < 0.0))
            .collect();
        let fixed: Vec<Result<Vec<f64>>> = negative
            .par_iter()
            .map(|&j| {
                let out = nnls::solve(&self.k22, &self.chol, b.col_as_slice(j), &self.settings)?;
                Ok(nnls::require_converged(out, "balayage projection")?.x)
            })
            .collect();
        for (&j, col) in negative.iter().zip(fixed) {
            x.col_as_slice_mut(j).copy_from_slice(&col?);
        }
        Ok(x)
    }

    /// Columns whose potentials match unit masses at every complement node,
    /// without the sign constraint.
    pub fn sweep_columns_linear(&self, cloud: &PointCloud) -> Result<Mat<f64>> {
        Ok(self.linear_columns(cloud)?.1)
    }

    fn linear_columns(&self, cloud: &PointCloud) -> Result<(Mat<f64>, Mat<f64>)> {
        check_dense(self.a2.len(), cloud.len())?;
        let b = crate::kernels::riesz_cross_matrix(&self.a2, cloud, &self.params)?;
        let x = self.chol.solve_mat(b.as_ref());
        Ok((b, x))
    }

    /// Compares the joint sweep with the sum of per-atom sweeps.
    pub fn superposition_check(&self, mu: &DiscreteMeasure) -> Result<SuperpositionReport> {
        let joint = self.sweep(mu)?;
        let mut acc = vec![0.0; self.a2.len()];
        let support = mu.support();
        for &k in &support {
            let mut w = vec![0.0; mu.weights.len()];
            w[k] = mu.weights[k];
            let single = self.sweep(&DiscreteMeasure::new(mu.cloud.clone(), w)?)?;
            for (a, s) in acc.iter_mut().zip(&single.swept.weights) {
                *a += s;
            }
        }
        let scale = joint.swept.weights.iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-300);
        let diff = acc
            .iter()
            .zip(&joint.swept.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(SuperpositionReport {
            atoms: support.len(),
            max_discrepancy: diff / scale,
        })
    }

    /// Masses before and after sweeping.
    pub fn mass_loss_probe(&self, mu: &DiscreteMeasure) -> Result<MassLoss> {
        let mass_in = mu.total_mass();
        if mass_in == 0.0 {
            return Ok(MassLoss {
                mass_in: 0.0,
                mass_out: 0.0,
                deficit: 0.0,
                truncation_radius: self.domain.truncation_radius,
            });
        }
        let r = self.sweep(mu)?;
        Ok(MassLoss {
            mass_in,
            mass_out: r.mass_out,
            deficit: mass_in - r.mass_out,
            truncation_radius: self.domain.truncation_radius,
        })
    }

    /// Green potential `k mu - k mu'` at probes in the domain.
    pub fn green_potential(&self, mu: &DiscreteMeasure, probes: &[Point]) -> Result<Vec<f64>> {
        for x in probes {
            if !self.domain.domain.contains(x) {
                return Err(Error::OutsideDomain { point: *x });
            }
        }
        let swept = self.sweep(mu)?.swept;
        Ok(probes
            .iter()
            .map(|x| potential(mu, x, &self.params) - potential(&swept, x, &self.params))
            .collect())
    }
}

fn combined_carrier(a: &PointCloud, b: &PointCloud) -> Carrier {
    if a.carrier == Carrier::Volume || b.carrier == Carrier::Volume {
        Carrier::Volume
    } else {
        Carrier::Surface
    }
}

/// Riesz potential of a measure at a point, smoothed inside its cells.
pub fn potential(mu: &DiscreteMeasure, x: &Point, p: &KernelParams) -> f64 {
    crate::kernels::riesz_potential_at(&mu.cloud, &mu.weights, x, p)
}

pub fn signed_potential(nu: &SignedDiscreteMeasure, x: &Point, p: &KernelParams) -> f64 {
    potential(&nu.plus, x, p) - potential(&nu.minus, x, p)
}

/// Deterministic probe points of the complement that avoid its nodes.
pub fn complement_probes(domain: &DomainSpec, a2: &PointCloud, count: usize) -> Vec<Point> {
    let hmin = a2.min_spacing();
    // Region where the mesh is at its finest.
    let fine: Vec<usize> = (0..a2.len())
        .filter(|&i| a2.spacing[i] <= 1.5 * hmin)
        .collect();
    let mut candidates = Vec::new();
    match domain.domain {
        Domain::HalfSpace => {
            let rf = fine
                .iter()
                .map(|&i| (a2.points[i][1].powi(2) + a2.points[i][2].powi(2)).sqrt())
                .fold(0.0f64, f64::max);
            let r = 0.85 * rf;
            for k in 0..4 * count {
                let rho = r * ((k as f64 + 0.3) / (4 * count) as f64).sqrt();
                let t = k as f64 * GOLDEN_ANGLE + 0.9;
                let depth = if a2.carrier == Carrier::Volume {
                    -(0.1 + 0.8 * ((k * 7) % 11) as f64 / 11.0) * r
                } else {
                    0.0
                };
                candidates.push([depth, rho * t.cos(), rho * t.sin()]);
            }
        }
        Domain::BallInterior { center, radius } | Domain::BallExterior { center, radius } => {
            let inside = matches!(domain.domain, Domain::BallExterior { .. });
            for (k, u) in fibonacci_directions(4 * count, 0.61).into_iter().enumerate() {
                let rr = if a2.carrier == Carrier::Volume {
                    let f = ((k * 5) % 9) as f64 / 9.0;
                    if inside {
                        radius * (0.3 + 0.6 * f)
                    } else {
                        radius * (1.05 + 0.5 * f)
                    }
                } else {
                    radius
                };
                candidates.push([
                    center[0] + rr * u[0],
                    center[1] + rr * u[1],
                    center[2] + rr * u[2],
                ]);
            }
        }
    }
    let mut out = Vec::with_capacity(count);
    for c in candidates {
        let (i, d) = a2.nearest(&c);
        if d >= 0.25 * a2.spacing[i] && !domain.domain.contains(&c) {
            out.push(c);
            if out.len() == count {
                break;
            }
        }
    }
    out
}

/// Potential of the mirror images of a half-space measure.
pub fn reflected_potential(mu: &DiscreteMeasure, x: &Point, p: &KernelParams) -> f64 {
    let s = p.decay();
    sum_iter(mu.cloud.points.iter().zip(&mu.weights).map(|(y, w)| {
        let yr = crate::geometry::reflect(y);
        w * crate::kernels::power_kernel(dist2(x, &yr), s)
    }))
}

/// Dense matrix of smoothed kernel values between probes and a cloud.
pub fn probe_matrix(probes: &[Point], cloud: &PointCloud, p: &KernelParams) -> Mat<f64> {
    let s = p.decay();
    matrix_from_fn(probes.len(), cloud.len(), |i, j| {
        smoothed_kernel(
            dist2(&probes[i], &cloud.points[j]),
            cloud.smoothing(j),
            s,
            cloud.carrier,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{plane_cloud, ComplementResolution};

    fn plane_sweeper() -> Sweeper {
        let res = ComplementResolution {
            core_spacing: 0.12,
            core_radius: 3.0,
            growth: 1.2,
        };
        let dom = DomainSpec::new(Domain::HalfSpace, 200.0).unwrap();
        let a2 = Arc::new(plane_cloud(&res, 200.0).unwrap());
        Sweeper::new(dom, a2, KernelParams::newtonian()).unwrap()
    }

    #[test]
    fn atom_sweep_matches_reflection() {
        let sw = plane_sweeper();
        let atoms = Arc::new(PointCloud::atoms(vec![[1.0, 0.0, 0.0]]).unwrap());
        let mu = DiscreteMeasure::new(atoms, vec![1.0]).unwrap();
        let r = sw.sweep(&mu).unwrap();
        let p = KernelParams::newtonian();
        for x in [[1.0, 1.0, 0.0], [0.5, 0.3, -0.4], [2.0, 0.0, 1.0]] {
            let a = potential(&r.swept, &x, &p);
            let b = reflected_potential(&mu, &x, &p);
            assert!((a - b).abs() < 0.02 * b, "{a} vs {b}");
        }
        assert!((r.mass_out - 1.0).abs() < 0.03);
        // Green potential at (1,1,0): 1 - 1/sqrt(5).
        let g = sw.green_potential(&mu, &[[1.0, 1.0, 0.0]]).unwrap()[0];
        assert!((g - 0.5528).abs() < 0.02 * 0.5528, "{g}");
    }

    #[test]
    fn measure_on_complement_is_fixed() {
        let sw = plane_sweeper();
        let n = sw.a2.len();
        let w: Vec<f64> = (0..n).map(|i| if i % 7 == 0 { 0.01 } else { 0.0 }).collect();
        let mu = DiscreteMeasure::new(sw.a2.clone(), w.clone()).unwrap();
        let r = sw.sweep(&mu).unwrap();
        for (a, b) in r.swept.weights.iter().zip(&w) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn green_potential_rejects_outside_probe() {
        let sw = plane_sweeper();
        let atoms = Arc::new(PointCloud::atoms(vec![[1.0, 0.0, 0.0]]).unwrap());
        let mu = DiscreteMeasure::new(atoms, vec![1.0]).unwrap();
        assert!(sw.green_potential(&mu, &[[-1.0, 0.0, 0.0]]).is_err());
    }
}
