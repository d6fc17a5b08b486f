mod common;

use std::f64::consts::PI;

use common::{image_green_matrix, newton_matrix};
use riesz_condenser::geometry::{ball_cloud, disc_cloud, Carrier};
use riesz_condenser::kernels::{
    green_halfspace, green_halfspace_matrix, riesz, riesz_matrix, self_term, DiagonalPolicy, KernelParams,
};

#[test]
fn newtonian_kernel_is_the_inverse_distance() {
    let p = KernelParams::newtonian();
    let v = riesz(&[0.0, 0.0, 0.0], &[0.0, 3.0, 4.0], &p).unwrap();
    assert!((v - 0.2).abs() < 1e-15);
    let q = KernelParams::new(3, 1.5).unwrap();
    let v = riesz(&[0.0, 0.0, 0.0], &[0.0, 0.0, 4.0], &q).unwrap();
    assert!((v - 4f64.powf(-1.5)).abs() < 1e-15);
    assert!(riesz(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &p).is_err());
}

#[test]
fn parameters_outside_the_admissible_range_are_rejected() {
    assert!(KernelParams::new(3, 0.0).is_err());
    assert!(KernelParams::new(3, 2.5).is_err());
    assert!(KernelParams::new(3, 1.0).is_ok());
}

#[test]
fn cell_means_have_closed_forms_for_the_newtonian_kernel() {
    let p = KernelParams::newtonian();
    let h = 0.37;
    let disc = self_term(h, Carrier::Surface, &p, DiagonalPolicy::CellAverage);
    assert!((disc - 16.0 / (3.0 * PI * h)).abs() < 1e-9 / h);
    let ball = self_term(h, Carrier::Volume, &p, DiagonalPolicy::CellAverage);
    assert!((ball - 6.0 / (5.0 * h)).abs() < 1e-9 / h);
    assert_eq!(self_term(h, Carrier::Atoms, &p, DiagonalPolicy::Atomic), 0.0);
    let centre = self_term(h, Carrier::Volume, &p, DiagonalPolicy::CenterValue);
    assert!((centre - 1.5 / h).abs() < 1e-12);
}

#[test]
fn dense_matrices_match_entrywise_oracles() {
    let p = KernelParams::newtonian();
    for cloud in [disc_cloud(0.5, &[1.0, 0.0, 0.0], 120).unwrap(), ball_cloud(0.4, &[1.0, 0.0, 0.0], 150).unwrap()] {
        let n = cloud.len();
        let k = riesz_matrix(&cloud, &p, DiagonalPolicy::CellAverage).unwrap();
        let g = green_halfspace_matrix(&cloud, DiagonalPolicy::CellAverage).unwrap();
        let (ko, go) = (newton_matrix(&cloud), image_green_matrix(&cloud));
        for i in 0..n {
            for j in 0..n {
                assert!((k[(i, j)] - ko[i * n + j]).abs() <= 1e-9 * ko[i * n + j].abs());
                assert!((g[(i, j)] - go[i * n + j]).abs() <= 1e-9 * go[i * n + j].abs().max(1e-3));
            }
        }
    }
}

#[test]
fn half_space_green_kernel_vanishes_on_the_boundary_and_is_symmetric() {
    let x = [0.7, 0.2, -0.1];
    let y = [1.3, -0.4, 0.5];
    let a = green_halfspace(&x, &y).unwrap();
    let b = green_halfspace(&y, &x).unwrap();
    assert!((a - b).abs() < 1e-15 && a > 0.0);
    let near = green_halfspace(&[1e-9, 0.0, 0.0], &y).unwrap();
    assert!(near.abs() < 1e-8);
    assert!(green_halfspace(&[-0.1, 0.0, 0.0], &y).is_err());
}
