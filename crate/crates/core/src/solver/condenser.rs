//! Condenser solutions `nu = lambda - lambda'`, condenser measures and
//! support diagnostics.

use std::sync::Arc;

use serde::Serialize;

use crate::balayage::{signed_potential, SweepResult, Sweeper};
use crate::energy::{energy_standard, energy_weak, WeakEnergy, WeakEnergySettings};
use crate::error::{Error, Result};
use crate::geometry::{disc_cloud, dist, CondenserSpec, DiscreteMeasure, Point, SignedDiscreteMeasure};
use crate::green::GreenKernel;
use crate::kernels::{riesz_cross_matrix, riesz_matrix, DiagonalPolicy, KernelParams};
use crate::numerics::{dot, matvec, symv};
use crate::solver::capacity::{green_equilibrium, GreenEquilibrium};
use crate::solver::gauss::{ConstraintSpec, ExternalField, GaussProblem, GaussSolution};
use crate::solver::qp::{QpSettings, QpStart};

fn check_sweeper(condenser: &CondenserSpec, sweeper: &Sweeper) -> Result<()> {
    if !Arc::ptr_eq(&condenser.a2, &sweeper.a2) {
        return Err(Error::param("sweeper and condenser use different complement clouds"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CondenserSolution {
    /// Positive part on the plate, negative part the sweep of it.
    pub nu: SignedDiscreteMeasure,
    pub gauss: GaussSolution,
    pub sweep: SweepResult,
    pub field: Vec<f64>,
    /// `lambda' G lambda + 2 <f, lambda>`.
    pub green_objective: f64,
    pub weak: WeakEnergy,
    /// Weak energy of `nu` plus `2 <f, nu>`.
    pub weak_objective: f64,
    /// Standard energy of `nu` plus `2 <f, nu>`, when the plates are separated.
    pub standard_objective: Option<f64>,
}

pub fn solve_condenser(
    condenser: &CondenserSpec,
    sweeper: &Sweeper,
    green: &GreenKernel,
    field: &ExternalField,
    constraint: &ConstraintSpec,
    settings: &QpSettings,
    weak_settings: &WeakEnergySettings,
) -> Result<CondenserSolution> {
    check_sweeper(condenser, sweeper)?;
    let problem = GaussProblem::new(condenser.a1.clone(), green, field, constraint)?;
    let gauss = problem.solve(&QpStart::Uniform, settings)?;
    if !gauss.converged {
        return Err(Error::NonConvergence {
            what: "Gauss problem",
            iterations: gauss.iterations,
            residual: gauss.certificate.max_violation(),
        });
    }
    let sweep = sweeper.sweep(&gauss.lambda)?;
    let nu = SignedDiscreteMeasure::new(gauss.lambda.clone(), sweep.swept.clone())?;
    // The field vanishes on the complement, so only the plate part pairs with it.
    let pairing = dot(&problem.f, &gauss.lambda.weights);
    let weak = energy_weak(&nu, &sweeper.params, weak_settings)?;
    let standard_objective = (condenser.separation > 0.0)
        .then(|| energy_standard(&nu, &sweeper.params, DiagonalPolicy::CellAverage) + 2.0 * pairing);
    Ok(CondenserSolution {
        green_objective: gauss.objective,
        weak_objective: weak.value + 2.0 * pairing,
        weak,
        standard_objective,
        field: problem.f,
        nu,
        gauss,
        sweep,
    })
}

#[derive(Debug, Clone)]
pub struct CondenserMeasure {
    /// Green equilibrium measure minus its sweep.
    pub theta: SignedDiscreteMeasure,
    pub equilibrium: GreenEquilibrium,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PotentialRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl PotentialRange {
    fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut r = PotentialRange {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            count: 0,
        };
        for v in values {
            r.min = r.min.min(v);
            r.max = r.max.max(v);
            r.count += 1;
        }
        r
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CondenserPotentialCheck {
    /// Plate nodes at least one cell radius from the plate edge.
    pub plate: PotentialRange,
    pub complement: PotentialRange,
    pub probes: PotentialRange,
}

impl CondenserMeasure {
    /// Riesz potential of `theta` at the plate nodes, the complement nodes and
    /// extra probes.
    pub fn potential_check(&self, condenser: &CondenserSpec, sweeper: &Sweeper, probes: &[Point]) -> Result<CondenserPotentialCheck> {
        check_sweeper(condenser, sweeper)?;
        let p = sweeper.params;
        let a1 = &condenser.a1;
        let gp = &self.theta.plus.weights;
        let gm = &self.theta.minus.weights;
        let k11 = riesz_matrix(a1, &p, DiagonalPolicy::CellAverage)?;
        let k12 = riesz_cross_matrix(a1, &condenser.a2, &p)?;
        let on_plate: Vec<f64> = symv(&k11, gp)
            .into_iter()
            .zip(matvec(k12.as_ref(), gm))
            .map(|(a, b)| a - b)
            .collect();
        let on_complement: Vec<f64> = matvec(k12.transpose(), gp)
            .into_iter()
            .zip(symv(sweeper.complement_matrix(), gm))
            .map(|(a, b)| a - b)
            .collect();
        let plate = PotentialRange::of(
            (0..a1.len())
                .filter(|&i| a1.boundary_distance[i] >= a1.spacing[i])
                .map(|i| on_plate[i]),
        );
        Ok(CondenserPotentialCheck {
            plate,
            complement: PotentialRange::of(on_complement),
            probes: PotentialRange::of(probes.iter().map(|x| signed_potential(&self.theta, x, &p))),
        })
    }
}

pub fn condenser_measure(condenser: &CondenserSpec, sweeper: &Sweeper, green: &GreenKernel) -> Result<CondenserMeasure> {
    check_sweeper(condenser, sweeper)?;
    let equilibrium = green_equilibrium(condenser.a1.clone(), green)?;
    let swept = sweeper.sweep(&equilibrium.gamma)?.swept;
    Ok(CondenserMeasure {
        theta: SignedDiscreteMeasure::new(equilibrium.gamma.clone(), swept)?,
        equilibrium,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportReport {
    pub threshold: f64,
    pub plus_support_nodes: usize,
    /// Plate mass within one cell radius of the plate boundary.
    pub plus_boundary_fraction: f64,
    pub plus_interior_fraction: f64,
    /// Complement mass within one cell radius of the domain boundary.
    pub minus_boundary_fraction: f64,
    /// Largest `k nu / w'` at probes of the domain away from the plate.
    pub max_potential_ratio_off_plate: f64,
}

/// Classifies where the two parts of a condenser solution live.
pub fn support_analysis(
    nu: &SignedDiscreteMeasure,
    w: f64,
    condenser: &CondenserSpec,
    p: &KernelParams,
    probes: &[Point],
    threshold: f64,
) -> Result<SupportReport> {
    let plus = &nu.plus;
    let minus = &nu.minus;
    if !Arc::ptr_eq(&plus.cloud, &condenser.a1) {
        return Err(Error::param("positive part is not on the plate cloud"));
    }
    let a1 = &condenser.a1;
    let wmax = plus.weights.iter().copied().fold(0.0, f64::max);
    let support = plus.weights.iter().filter(|&&v| v > threshold * wmax).count();
    let total = plus.total_mass();
    let near: f64 = (0..a1.len())
        .filter(|&i| a1.boundary_distance[i] <= a1.spacing[i])
        .map(|i| plus.weights[i])
        .sum();
    let c2 = &minus.cloud;
    let dom = condenser.domain.domain;
    let minus_total = minus.total_mass();
    let minus_near: f64 = (0..c2.len())
        .filter(|&i| dom.distance_to_boundary(&c2.points[i]) <= c2.spacing[i])
        .map(|i| minus.weights[i])
        .sum();
    let h = a1.max_spacing();
    let mut ratio = f64::NEG_INFINITY;
    for x in probes {
        if !dom.contains(x) {
            return Err(Error::OutsideDomain { point: *x });
        }
        let (_, d) = a1.nearest(x);
        if d >= 2.0 * h {
            ratio = ratio.max(signed_potential(nu, x, p) / w);
        }
    }
    Ok(SupportReport {
        threshold,
        plus_support_nodes: support,
        plus_boundary_fraction: near / total,
        plus_interior_fraction: 1.0 - near / total,
        minus_boundary_fraction: if minus_total > 0.0 { minus_near / minus_total } else { 1.0 },
        max_potential_ratio_off_plate: ratio,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UnsolvabilityStep {
    /// Disc radius.
    pub radius: f64,
    /// Height over the boundary plane divided by the radius.
    pub relative_height: f64,
    pub nodes: usize,
    /// Green energy of the unit-mass capacitary measure.
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnsolvabilityTrace {
    pub height: f64,
    pub steps: Vec<UnsolvabilityStep>,
    pub strictly_decreasing: bool,
    pub all_positive: bool,
}

/// Unit-mass measures on discs parallel to the boundary plane of the
/// half-space, all in the slab `0 < x1 <= height` which touches the boundary.
/// Their Green energies decrease towards zero, which is not attained.
pub fn unsolvability_demo(height: f64, radii: &[f64], nodes: usize) -> Result<UnsolvabilityTrace> {
    if !(height > 0.0) || radii.is_empty() {
        return Err(Error::param("the demo needs a positive height and at least one radius"));
    }
    let green = GreenKernel::halfspace();
    let mut steps = Vec::with_capacity(radii.len());
    for &r in radii {
        let cloud = Arc::new(disc_cloud(r, &[height, 0.0, 0.0], nodes)?);
        let problem = GaussProblem::new(cloud, &green, &ExternalField::None, &ConstraintSpec::unbounded())?;
        let sol = problem.solve(&QpStart::Uniform, &QpSettings::default())?;
        if !sol.converged {
            return Err(Error::NonConvergence {
                what: "unsolvability demo",
                iterations: sol.iterations,
                residual: sol.certificate.max_violation(),
            });
        }
        steps.push(UnsolvabilityStep {
            radius: r,
            relative_height: height / r,
            nodes,
            objective: sol.objective,
        });
    }
    let strictly_decreasing = steps.windows(2).all(|w| w[1].objective < w[0].objective);
    let all_positive = steps.iter().all(|s| s.objective > 0.0);
    Ok(UnsolvabilityTrace {
        height,
        steps,
        strictly_decreasing,
        all_positive,
    })
}

/// Mass of a measure within distance `r` of a point.
pub fn mass_within(mu: &DiscreteMeasure, center: &Point, r: f64) -> f64 {
    mu.cloud
        .points
        .iter()
        .zip(&mu.weights)
        .filter(|(x, _)| dist(x, center) <= r)
        .map(|(_, w)| w)
        .sum()
}
