//! The constrained Gauss problem on a plate in a domain: minimise
//! `lambda' G lambda + 2 f' lambda` over unit-mass `lambda` below a constraint.

use std::sync::Arc;

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DiscreteMeasure, PointCloud, SignedDiscreteMeasure};
use crate::green::GreenKernel;
use crate::numerics::matvec;
use crate::solver::certificate::{certify, CertificateReport};
use crate::solver::qp::{CappedSimplexQp, QpMethod, QpSettings, QpStart};

/// External field on the plate.
#[derive(Debug, Clone)]
pub enum ExternalField {
    None,
    /// Non-negative values at the plate nodes; zero on the complement.
    Given { values: Vec<f64> },
    /// Green potential of a signed measure in the domain.
    GreenPotential { zeta: SignedDiscreteMeasure },
}

impl ExternalField {
    /// Field values at the plate nodes. `g` is the Green matrix of the plate.
    pub fn values(&self, a1: &Arc<PointCloud>, g: &Mat<f64>, green: &GreenKernel) -> Result<Vec<f64>> {
        let n = a1.len();
        match self {
            ExternalField::None => Ok(vec![0.0; n]),
            ExternalField::Given { values } => {
                if values.len() != n {
                    return Err(Error::param("field length differs from node count"));
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::param("given field values must be finite and non-negative"));
                }
                Ok(values.clone())
            }
            ExternalField::GreenPotential { zeta } => {
                let mut f = vec![0.0; n];
                for (part, sign) in [(&zeta.plus, 1.0), (&zeta.minus, -1.0)] {
                    if part.total_mass() == 0.0 {
                        continue;
                    }
                    let pot = if Arc::ptr_eq(&part.cloud, a1) {
                        matvec(g.as_ref(), &part.weights)
                    } else {
                        let cross = green.cross(a1, &part.cloud)?;
                        matvec(cross.as_ref(), &part.weights)
                    };
                    for (a, b) in f.iter_mut().zip(pot) {
                        *a += sign * b;
                    }
                }
                Ok(f)
            }
        }
    }
}

/// Upper bounds on the node masses; `None` is the unconstrained problem.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSpec {
    pub upper: Option<Vec<f64>>,
}

impl ConstraintSpec {
    pub fn unbounded() -> Self {
        ConstraintSpec { upper: None }
    }

    pub fn bounded(upper: Vec<f64>) -> Result<Self> {
        if upper.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::param("constraint masses must be positive"));
        }
        Ok(ConstraintSpec { upper: Some(upper) })
    }

    /// Node masses of a constraint density.
    pub fn from_density(cloud: &PointCloud, sigma: impl Fn(&[f64; 3]) -> f64) -> Result<Self> {
        ConstraintSpec::bounded(
            cloud
                .points
                .iter()
                .zip(&cloud.quad_weight)
                .map(|(x, q)| sigma(x) * q)
                .collect(),
        )
    }

    pub fn total(&self) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, |u| u.iter().sum())
    }
}

#[derive(Debug, Clone)]
pub struct GaussSolution {
    pub lambda: DiscreteMeasure,
    /// Multiplier of the mass constraint.
    pub w: f64,
    pub objective: f64,
    pub certificate: CertificateReport,
    pub iterations: usize,
    pub converged: bool,
    /// The constraint has total mass one and is the only feasible point.
    pub saturated: bool,
    pub method: QpMethod,
}

/// A discretised Gauss problem.
#[derive(Debug, Clone)]
pub struct GaussProblem {
    pub a1: Arc<PointCloud>,
    pub g: Mat<f64>,
    pub f: Vec<f64>,
    pub upper: Option<Vec<f64>>,
}

impl GaussProblem {
    pub fn new(a1: Arc<PointCloud>, green: &GreenKernel, field: &ExternalField, constraint: &ConstraintSpec) -> Result<Self> {
        let g = green.matrix(&a1)?;
        let f = field.values(&a1, &g, green)?;
        GaussProblem::from_matrix(a1, g, f, constraint.upper.clone())
    }

    pub fn from_matrix(a1: Arc<PointCloud>, g: Mat<f64>, f: Vec<f64>, upper: Option<Vec<f64>>) -> Result<Self> {
        let n = a1.len();
        if g.nrows() != n || g.ncols() != n || f.len() != n || upper.as_ref().is_some_and(|u| u.len() != n) {
            return Err(Error::param("Gauss problem dimensions disagree"));
        }
        if let Some(u) = &upper {
            let total: f64 = u.iter().sum();
            if total < 1.0 - 1e-12 {
                return Err(Error::Infeasible(format!("constraint has total mass {total} < 1")));
            }
        }
        Ok(GaussProblem { a1, g, f, upper })
    }

    pub fn qp(&self) -> CappedSimplexQp<'_> {
        CappedSimplexQp {
            g: &self.g,
            f: &self.f,
            upper: self.upper.as_deref(),
        }
    }

    pub fn solve(&self, start: &QpStart, settings: &QpSettings) -> Result<GaussSolution> {
        let out = self.qp().solve(start, settings)?;
        Ok(GaussSolution {
            lambda: DiscreteMeasure::new(self.a1.clone(), out.x)?,
            w: out.w,
            objective: out.objective,
            certificate: out.certificate,
            iterations: out.iterations,
            converged: out.converged,
            saturated: out.method == QpMethod::Saturated,
            method: out.method,
        })
    }

    /// Certificate of arbitrary unit-mass weights.
    pub fn verify(&self, weights: &[f64]) -> CertificateReport {
        certify(&self.qp(), weights, None)
    }

    pub fn objective(&self, weights: &[f64]) -> f64 {
        self.qp().objective(weights)
    }
}

pub fn solve_gauss(
    a1: Arc<PointCloud>,
    green: &GreenKernel,
    field: &ExternalField,
    constraint: &ConstraintSpec,
    settings: &QpSettings,
) -> Result<GaussSolution> {
    GaussProblem::new(a1, green, field, constraint)?.solve(&QpStart::Uniform, settings)
}

#[derive(Debug, Clone, Serialize)]
pub struct DeterminismReport {
    pub max_discrepancy: f64,
    pub bitwise_identical: bool,
    /// One of the runs did not converge.
    pub inconclusive: bool,
}

/// Solves twice from different starting points and compares the weights.
pub fn determinism_check(problem: &GaussProblem, a: &QpStart, b: &QpStart, settings: &QpSettings) -> Result<DeterminismReport> {
    let x = problem.solve(a, settings)?;
    let y = problem.solve(b, settings)?;
    let max_discrepancy = x
        .lambda
        .weights
        .iter()
        .zip(&y.lambda.weights)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    Ok(DeterminismReport {
        max_discrepancy,
        bitwise_identical: x.lambda.weights == y.lambda.weights,
        inconclusive: !(x.converged && y.converged),
    })
}
