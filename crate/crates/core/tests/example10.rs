mod common;

use std::sync::Arc;

use common::{image_green_matrix, matrix_capacity};
use riesz_condenser::example10::{compute_psi, green_capacity_of_disc, homogeneity_check, offset_disc, psi};
use riesz_condenser::green::GreenKernel;
use riesz_condenser::solver::green_capacity;
use riesz_condenser::Error;

#[test]
fn capacity_scales_with_the_disc() {
    let h = homogeneity_check(2.0, 0.4, 600).unwrap();
    assert!(h.relative_error < 1e-9, "{}", h.relative_error);
}

#[test]
fn capacity_does_not_depend_on_the_position_along_the_boundary() {
    let green = GreenKernel::halfspace();
    let a = green_capacity(Arc::new(offset_disc(1.0, 0.5, 0.0, 500).unwrap()), &green).unwrap().value;
    let b = green_capacity(Arc::new(offset_disc(1.0, 0.5, 3.0, 500).unwrap()), &green).unwrap().value;
    assert!((a - b).abs() < 1e-9 * a);
    assert!((green_capacity_of_disc(1.0, 0.5, 500).unwrap() - a).abs() < 1e-12 * a);
}

#[test]
fn psi_matches_a_linear_solve_and_grows_as_the_disc_nears_the_boundary() {
    let curve = compute_psi(&[1.0, 0.5, 0.25, 0.1], 800).unwrap();
    assert!(curve.increasing_as_delta_decreases());
    let cloud = offset_disc(1.0, 0.25, 0.0, 800).unwrap();
    let o = matrix_capacity(&image_green_matrix(&cloud), cloud.len()).value;
    let v = psi(0.25, 800).unwrap();
    assert!((v - o).abs() < 1e-9 * o);
}

#[test]
fn psi_is_stable_under_refinement() {
    let coarse = psi(0.5, 1000).unwrap();
    let medium = psi(0.5, 2000).unwrap();
    assert!((coarse - medium).abs() < 0.01 * medium, "{coarse} vs {medium}");
}

#[test]
fn discs_too_close_for_the_mesh_are_refused() {
    assert!(matches!(offset_disc(1.0, 0.01, 0.0, 400), Err(Error::Resolution(_))));
}
