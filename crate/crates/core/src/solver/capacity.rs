//! Capacities, capacitary measures and Green equilibrium measures.

use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::geometry::{DiscreteMeasure, PointCloud};
use crate::green::GreenKernel;
use crate::kernels::{riesz_matrix, DiagonalPolicy, KernelParams};
use crate::numerics::symv;
use crate::solver::gauss::{GaussProblem, GaussSolution};
use crate::solver::qp::{QpSettings, QpStart};

#[derive(Debug, Clone)]
pub struct CapacityResult {
    /// Reciprocal of the minimal energy of unit-mass measures.
    pub value: f64,
    /// The unit-mass minimiser.
    pub measure: DiscreteMeasure,
    pub solution: GaussSolution,
}

fn solve_capacity(problem: &GaussProblem, settings: &QpSettings) -> Result<CapacityResult> {
    let solution = problem.solve(&QpStart::Uniform, settings)?;
    if !solution.converged {
        return Err(Error::NonConvergence {
            what: "capacity",
            iterations: solution.iterations,
            residual: solution.certificate.max_violation(),
        });
    }
    Ok(CapacityResult {
        value: 1.0 / solution.objective,
        measure: solution.lambda.clone(),
        solution,
    })
}

fn zero_field_problem(cloud: Arc<PointCloud>, k: Mat<f64>) -> Result<GaussProblem> {
    if cloud.is_empty() {
        return Err(Error::param("capacity of an empty cloud"));
    }
    let n = cloud.len();
    GaussProblem::from_matrix(cloud, k, vec![0.0; n], None)
}

/// Capacity for an arbitrary symmetric positive-definite kernel matrix.
pub fn capacity_from_matrix(cloud: Arc<PointCloud>, k: Mat<f64>, settings: &QpSettings) -> Result<CapacityResult> {
    solve_capacity(&zero_field_problem(cloud, k)?, settings)
}

/// Riesz capacity of a cloud.
pub fn capacity(cloud: Arc<PointCloud>, p: &KernelParams, policy: DiagonalPolicy) -> Result<CapacityResult> {
    let k = riesz_matrix(&cloud, p, policy)?;
    capacity_from_matrix(cloud, k, &QpSettings::default())
}

/// Green capacity of a cloud in the domain.
pub fn green_capacity(cloud: Arc<PointCloud>, green: &GreenKernel) -> Result<CapacityResult> {
    let g = green.matrix(&cloud)?;
    capacity_from_matrix(cloud, g, &QpSettings::default())
}

#[derive(Debug, Clone)]
pub struct GreenEquilibrium {
    /// Capacity times the capacitary measure.
    pub gamma: DiscreteMeasure,
    pub capacity: f64,
    /// Green potential of `gamma` at the nodes.
    pub potential: Vec<f64>,
    pub solution: GaussSolution,
}

pub fn equilibrium_from_matrix(cloud: Arc<PointCloud>, g: Mat<f64>) -> Result<GreenEquilibrium> {
    let problem = zero_field_problem(cloud, g)?;
    let cap = solve_capacity(&problem, &QpSettings::default())?;
    let gamma = cap.measure.scaled(cap.value)?;
    let potential = symv(&problem.g, &gamma.weights);
    Ok(GreenEquilibrium {
        gamma,
        capacity: cap.value,
        potential,
        solution: cap.solution,
    })
}

pub fn green_equilibrium(cloud: Arc<PointCloud>, green: &GreenKernel) -> Result<GreenEquilibrium> {
    let g = green.matrix(&cloud)?;
    equilibrium_from_matrix(cloud, g)
}
