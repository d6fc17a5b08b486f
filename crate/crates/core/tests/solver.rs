mod common;

use std::sync::Arc;

use common::{image_green_matrix, matrix_capacity, newton_matrix};
use faer::Mat;
use riesz_condenser::geometry::{ball_cloud, disc_cloud, sphere_cloud, PointCloud};
use riesz_condenser::green::GreenKernel;
use riesz_condenser::kernels::{DiagonalPolicy, KernelParams};
use riesz_condenser::solver::{
    capacity, determinism_check, green_capacity, green_equilibrium, solve_gauss, ConstraintSpec, ExternalField,
    GaussProblem, QpSettings, QpStart,
};
use riesz_condenser::Error;

#[test]
fn sphere_and_ball_have_unit_capacity() {
    let p = KernelParams::newtonian();
    let s = capacity(Arc::new(sphere_cloud(1.0, &[0.0; 3], 1200).unwrap()), &p, DiagonalPolicy::CellAverage).unwrap();
    assert!((s.value - 1.0).abs() < 0.01, "{}", s.value);
    // Volume nodes stop half a cell short of the sphere.
    let ball = Arc::new(ball_cloud(1.0, &[0.0; 3], 1500).unwrap());
    let outer = ball.points.iter().map(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()).fold(0.0, f64::max);
    let b = capacity(ball, &p, DiagonalPolicy::CellAverage).unwrap();
    assert!(b.value >= outer && b.value <= 1.01, "{} outside [{outer}, 1.01]", b.value);
}

#[test]
fn disc_capacity_approaches_two_over_pi() {
    let p = KernelParams::newtonian();
    let cloud = Arc::new(disc_cloud(1.0, &[0.0; 3], 1000).unwrap());
    let c = capacity(cloud.clone(), &p, DiagonalPolicy::CellAverage).unwrap();
    let want = 2.0 / std::f64::consts::PI;
    assert!((c.value - want).abs() < 0.01 * want, "{}", c.value);
    let o = matrix_capacity(&newton_matrix(&cloud), cloud.len());
    assert!((c.value - o.value).abs() < 1e-9 * o.value);
}

#[test]
fn green_capacity_matches_a_linear_solve() {
    let cloud = Arc::new(disc_cloud(1.0, &[0.5, 0.0, 0.0], 600).unwrap());
    let c = green_capacity(cloud.clone(), &GreenKernel::halfspace()).unwrap();
    let o = matrix_capacity(&image_green_matrix(&cloud), cloud.len());
    assert!((c.value - o.value).abs() < 1e-9 * o.value);
    for (a, b) in c.measure.weights.iter().zip(&o.weights) {
        assert!((a - b).abs() < 1e-8 * b.abs().max(1e-6));
    }
}

#[test]
fn equilibrium_potential_is_one_on_the_plate() {
    let cloud = Arc::new(sphere_cloud(0.5, &[1.0, 0.0, 0.0], 400).unwrap());
    let eq = green_equilibrium(cloud, &GreenKernel::halfspace()).unwrap();
    assert!(eq.potential.iter().all(|v| (v - 1.0).abs() < 1e-9));
    assert!((eq.gamma.total_mass() - eq.capacity).abs() < 1e-12 * eq.capacity);
}

#[test]
fn caps_with_total_mass_below_one_are_infeasible() {
    let pts = vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
    let g = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.5 });
    let a1 = Arc::new(PointCloud::atoms(pts).unwrap());
    let r = GaussProblem::from_matrix(a1, g, vec![0.0, 0.0], Some(vec![0.4, 0.4]));
    assert!(matches!(r, Err(Error::Infeasible(_))));
}

#[test]
fn saturated_constraint_is_the_only_feasible_point() {
    let a1 = Arc::new(PointCloud::atoms(vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap());
    let g = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.5 });
    let p = GaussProblem::from_matrix(a1, g, vec![0.0, 0.0], Some(vec![0.3, 0.7])).unwrap();
    let sol = p.solve(&QpStart::Uniform, &QpSettings::default()).unwrap();
    assert!(sol.saturated);
    assert_eq!(sol.lambda.weights, vec![0.3, 0.7]);
}

#[test]
fn field_pushes_mass_away_from_where_it_is_large() {
    let cloud = Arc::new(disc_cloud(1.0, &[0.5, 0.0, 0.0], 300).unwrap());
    let values: Vec<f64> = cloud.points.iter().map(|x| if x[1] > 0.0 { 1.0 } else { 0.0 }).collect();
    let sol = solve_gauss(
        cloud.clone(),
        &GreenKernel::halfspace(),
        &ExternalField::Given { values },
        &ConstraintSpec::unbounded(),
        &QpSettings::default(),
    )
    .unwrap();
    let upper: f64 = cloud.points.iter().zip(&sol.lambda.weights).filter(|(x, _)| x[1] > 0.0).map(|(_, w)| w).sum();
    assert!(sol.converged && upper < 0.5);
    assert!(sol.certificate.passes(1e-6));
}

#[test]
fn different_starts_reach_the_same_minimiser() {
    let cloud = Arc::new(disc_cloud(1.0, &[0.5, 0.0, 0.0], 300).unwrap());
    let c = ConstraintSpec::from_density(&cloud, |_| 0.5).unwrap();
    let p = GaussProblem::new(cloud, &GreenKernel::halfspace(), &ExternalField::None, &c).unwrap();
    let r = determinism_check(&p, &QpStart::Uniform, &QpStart::Vertex(0), &QpSettings::default()).unwrap();
    assert!(!r.inconclusive);
    assert!(r.max_discrepancy < 1e-9, "{}", r.max_discrepancy);
}
