//! Green kernels of a domain: analytic for the Newtonian half-space, through
//! sweeping otherwise.

use std::sync::Arc;

use faer::Mat;

use crate::balayage::{potential, Sweeper};
use crate::error::{Error, Result};
use crate::geometry::{dist, dist2, reflect, Carrier, DiscreteMeasure, Domain, Point, PointCloud};
use crate::kernels::{
    green_halfspace, green_halfspace_matrix, riesz, riesz_cross_matrix, riesz_matrix,
    smoothed_kernel, DiagonalPolicy, KernelParams,
};
use crate::numerics::{check_dense, matrix_from_fn};

#[derive(Debug, Clone)]
pub enum GreenKernel {
    /// `1/|x-y| - 1/|x-y^|` on {x1 > 0}.
    HalfSpace { policy: DiagonalPolicy },
    /// `k(x,y) - k e'_y(x)` with the sweep of each node computed numerically
    /// so that the potentials agree at every complement node.
    Numeric {
        sweeper: Arc<Sweeper>,
        policy: DiagonalPolicy,
    },
}

impl GreenKernel {
    pub fn halfspace() -> Self {
        GreenKernel::HalfSpace {
            policy: DiagonalPolicy::CellAverage,
        }
    }

    pub fn numeric(sweeper: Arc<Sweeper>) -> Self {
        GreenKernel::Numeric {
            sweeper,
            policy: DiagonalPolicy::CellAverage,
        }
    }

    pub fn params(&self) -> KernelParams {
        match self {
            GreenKernel::HalfSpace { .. } => KernelParams::newtonian(),
            GreenKernel::Numeric { sweeper, .. } => sweeper.params,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            GreenKernel::HalfSpace { .. } => Domain::HalfSpace,
            GreenKernel::Numeric { sweeper, .. } => sweeper.domain.domain,
        }
    }

    fn check_inside(&self, cloud: &PointCloud) -> Result<()> {
        let d = self.domain();
        for x in &cloud.points {
            if !d.contains(x) {
                return Err(Error::OutsideDomain { point: *x });
            }
        }
        Ok(())
    }

    /// Dense Green matrix of a cloud in the domain.
    pub fn matrix(&self, cloud: &PointCloud) -> Result<Mat<f64>> {
        self.check_inside(cloud)?;
        match self {
            GreenKernel::HalfSpace { policy } => green_halfspace_matrix(cloud, *policy),
            GreenKernel::Numeric { sweeper, policy } => {
                let p = sweeper.params;
                let k11 = riesz_matrix(cloud, &p, *policy)?;
                let k12 = riesz_cross_matrix(cloud, &sweeper.a2, &p)?;
                let swept = sweeper.sweep_columns_linear(cloud)?;
                let g = k11 - &k12 * &swept;
                let n = cloud.len();
                Ok(Mat::from_fn(n, n, |i, j| 0.5 * (g[(i, j)] + g[(j, i)])))
            }
        }
    }

    /// Green interaction between two clouds in the domain, smoothed within cells.
    pub fn cross(&self, rows: &PointCloud, cols: &PointCloud) -> Result<Mat<f64>> {
        self.check_inside(rows)?;
        self.check_inside(cols)?;
        check_dense(rows.len(), cols.len())?;
        match self {
            GreenKernel::HalfSpace { .. } => Ok(matrix_from_fn(rows.len(), cols.len(), |i, j| {
                let x = &rows.points[i];
                let y = &cols.points[j];
                let h = rows.smoothing(i).max(cols.smoothing(j));
                smoothed_kernel(dist2(x, y), h, 1.0, Carrier::Volume) - 1.0 / dist(x, &reflect(y))
            })),
            GreenKernel::Numeric { sweeper, .. } => {
                let p = sweeper.params;
                let k = riesz_cross_matrix(rows, cols, &p)?;
                let k1 = riesz_cross_matrix(rows, &sweeper.a2, &p)?;
                let swept = sweeper.sweep_columns_linear(cols)?;
                Ok(k - &k1 * &swept)
            }
        }
    }

    /// Pointwise kernel value for distinct points of the domain.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        match self {
            GreenKernel::HalfSpace { .. } => green_halfspace(x, y),
            GreenKernel::Numeric { sweeper, .. } => {
                let d = sweeper.domain.domain;
                for z in [x, y] {
                    if !d.contains(z) {
                        return Err(Error::OutsideDomain { point: *z });
                    }
                }
                let direct = riesz(x, y, &sweeper.params)?;
                let atom = Arc::new(PointCloud::atoms(vec![*y])?);
                let unit = DiscreteMeasure::new(atom, vec![1.0])?;
                let swept = sweeper.sweep(&unit)?.swept;
                Ok(direct - potential(&swept, x, &sweeper.params))
            }
        }
    }

    /// Green potential of a measure at probes in the domain.
    pub fn potential(&self, mu: &DiscreteMeasure, probes: &[Point]) -> Result<Vec<f64>> {
        match self {
            GreenKernel::HalfSpace { .. } => {
                let d = Domain::HalfSpace;
                probes
                    .iter()
                    .map(|x| {
                        if !d.contains(x) {
                            return Err(Error::OutsideDomain { point: *x });
                        }
                        let p = KernelParams::newtonian();
                        let direct = potential(mu, x, &p);
                        let image = crate::balayage::reflected_potential(mu, x, &p);
                        Ok(direct - image)
                    })
                    .collect()
            }
            GreenKernel::Numeric { sweeper, .. } => sweeper.green_potential(mu, probes),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{disc_cloud, plane_cloud, ComplementResolution, DomainSpec};

    #[test]
    fn numeric_matrix_tracks_analytic_halfspace() {
        let res = ComplementResolution {
            core_spacing: 0.08,
            core_radius: 2.5,
            growth: 1.2,
        };
        let dom = DomainSpec::new(Domain::HalfSpace, 200.0).unwrap();
        let a2 = Arc::new(plane_cloud(&res, 200.0).unwrap());
        let sw = Arc::new(Sweeper::new(dom, a2, KernelParams::newtonian()).unwrap());
        let cloud = disc_cloud(1.0, &[0.5, 0.0, 0.0], 60).unwrap();
        let gn = GreenKernel::numeric(sw).matrix(&cloud).unwrap();
        let ga = GreenKernel::halfspace().matrix(&cloud).unwrap();
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                if i != j {
                    let rel = (gn[(i, j)] - ga[(i, j)]).abs() / ga[(i, j)];
                    assert!(rel < 0.03, "{i} {j} {} {}", gn[(i, j)], ga[(i, j)]);
                }
            }
        }
    }
}
