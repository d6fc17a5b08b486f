use std::f64::consts::PI;

use riesz_condenser::geometry::{
    ball_cloud, disc_cloud, discretize_complement, sphere_cloud, Carrier, ComplementResolution, Domain, DomainSpec,
    PointCloud,
};
use riesz_condenser::kernels::KernelParams;

#[test]
fn quadrature_weights_add_up_to_the_measure_of_the_set() {
    let d = disc_cloud(0.7, &[1.0, 0.0, 0.0], 500).unwrap();
    assert!((d.total_weight() - PI * 0.49).abs() < 1e-12);
    let s = sphere_cloud(0.5, &[1.0, 0.0, 0.0], 600).unwrap();
    assert!((s.total_weight() - 4.0 * PI * 0.25).abs() < 1e-9 * s.total_weight());
    let b = ball_cloud(0.5, &[1.0, 0.0, 0.0], 800).unwrap();
    assert!((b.total_weight() / (4.0 / 3.0 * PI * 0.125) - 1.0).abs() < 1e-6);
    assert_eq!(b.carrier, Carrier::Volume);
}

#[test]
fn disc_lies_in_a_plane_parallel_to_the_boundary() {
    let d = disc_cloud(1.0, &[0.3, 2.0, -1.0], 200).unwrap();
    assert!(d.points.iter().all(|x| x[0] == 0.3));
    assert!(d.points.iter().all(|x| ((x[1] - 2.0).hypot(x[2] + 1.0)) < 1.0));
    assert!(d.boundary_distance.iter().all(|&b| b > 0.0 && b <= 1.0));
}

#[test]
fn sphere_nodes_sit_on_the_sphere() {
    let c = [0.0, 1.0, 2.0];
    let s = sphere_cloud(2.0, &c, 300).unwrap();
    for x in &s.points {
        let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt();
        assert!((r - 2.0).abs() < 1e-12);
    }
}

#[test]
fn atoms_are_never_smoothed() {
    let a = PointCloud::atoms(vec![[1.0, 0.0, 0.0]]).unwrap();
    assert_eq!(a.smoothing(0), 0.0);
    let d = disc_cloud(1.0, &[1.0, 0.0, 0.0], 100).unwrap();
    assert_eq!(d.smoothing(3), d.spacing[3]);
}

#[test]
fn duplicate_and_empty_clouds_are_rejected() {
    assert!(PointCloud::atoms(vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).is_err());
    assert!(PointCloud::atoms(vec![]).is_err());
    assert!(disc_cloud(1.0, &[1.0, 0.0, 0.0], 4).is_err());
    assert!(disc_cloud(-1.0, &[1.0, 0.0, 0.0], 100).is_err());
}

#[test]
fn scaling_and_translation_move_nodes_and_cells() {
    let d = disc_cloud(1.0, &[1.0, 0.0, 0.0], 100).unwrap();
    let s = d.scaled(2.0).unwrap();
    assert!((s.spacing[0] - 2.0 * d.spacing[0]).abs() < 1e-15);
    assert!((s.total_weight() - 4.0 * d.total_weight()).abs() < 1e-12);
    let t = d.translated(&[0.0, 1.0, 0.0]).unwrap();
    assert_eq!(t.points[5][1], d.points[5][1] + 1.0);
}

#[test]
fn complement_meshes_follow_the_kernel() {
    let spec = DomainSpec::new(Domain::HalfSpace, 20.0).unwrap();
    let res = ComplementResolution { core_spacing: 0.2, core_radius: 2.0, growth: 1.3 };
    let plane = discretize_complement(&spec, &res, &KernelParams::newtonian()).unwrap();
    assert!(plane.points.iter().all(|x| x[0] == 0.0));
    let solid = discretize_complement(&spec, &res, &KernelParams::new(3, 1.5).unwrap()).unwrap();
    assert!(solid.points.iter().all(|x| x[0] < 0.0));
    assert!(solid.points.iter().all(|x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() <= 20.0 + 1e-9));
}

#[test]
fn domains_classify_points() {
    let ball = Domain::BallInterior { center: [0.0; 3], radius: 1.0 };
    assert!(ball.contains(&[0.5, 0.0, 0.0]));
    assert!(!ball.contains(&[1.5, 0.0, 0.0]));
    assert!((ball.distance_to_boundary(&[0.25, 0.0, 0.0]) - 0.75).abs() < 1e-15);
    assert!(Domain::HalfSpace.contains(&[1e-9, 0.0, 0.0]));
    assert!(!Domain::HalfSpace.contains(&[0.0, 0.0, 0.0]));
    assert!(DomainSpec::new(Domain::BallExterior { center: [0.0; 3], radius: -1.0 }, 10.0).is_err());
}
