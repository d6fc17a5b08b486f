mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::newton_energy;
use riesz_condenser::energy::{energy_of, energy_weak, energy_weak_positive, mutual_energy, WeakEnergySettings};
use riesz_condenser::geometry::{ball_cloud, disc_cloud, DiscreteMeasure, SignedDiscreteMeasure};
use riesz_condenser::kernels::{DiagonalPolicy, KernelParams};

#[test]
fn standard_energy_matches_the_pair_sum_oracle() {
    let cloud = Arc::new(disc_cloud(0.5, &[1.0, 0.0, 0.0], 300).unwrap());
    let mu = DiscreteMeasure::from_density(cloud.clone(), |x| 1.0 + x[1] * x[1]).unwrap();
    let e = energy_of(&mu, &KernelParams::newtonian(), DiagonalPolicy::CellAverage);
    let o = newton_energy(&cloud, &mu.weights);
    assert!((e - o).abs() <= 1e-12 * o);
}

#[test]
fn mutual_energy_is_symmetric() {
    let p = KernelParams::newtonian();
    let a = DiscreteMeasure::uniform(Arc::new(disc_cloud(0.5, &[1.0, 0.0, 0.0], 200).unwrap()), 1.0).unwrap();
    let b = DiscreteMeasure::uniform(Arc::new(ball_cloud(0.3, &[2.0, 0.0, 0.0], 200).unwrap()), 2.0).unwrap();
    let ab = mutual_energy(&a, &b, &p, DiagonalPolicy::CellAverage);
    let ba = mutual_energy(&b, &a, &p, DiagonalPolicy::CellAverage);
    assert!((ab - ba).abs() <= 1e-12 * ab.abs());
}

#[test]
fn uniform_ball_weak_energy_is_six_fifths() {
    let mu = DiscreteMeasure::uniform(Arc::new(ball_cloud(1.0, &[0.0; 3], 1500).unwrap()), 1.0).unwrap();
    let e = energy_weak_positive(&mu, &KernelParams::newtonian(), &WeakEnergySettings::default()).unwrap();
    assert!((e.value - 1.2).abs() < 0.03 * 1.2, "{}", e.value);
}

#[test]
fn uniform_disc_weak_energy_is_sixteen_over_three_pi() {
    let mu = DiscreteMeasure::uniform(Arc::new(disc_cloud(1.0, &[0.0; 3], 800).unwrap()), 1.0).unwrap();
    let e = energy_weak_positive(&mu, &KernelParams::newtonian(), &WeakEnergySettings::default()).unwrap();
    let want = 16.0 / (3.0 * PI);
    assert!((e.value - want).abs() < 0.02 * want, "{}", e.value);
}

#[test]
fn weak_energy_of_a_difference_is_positive_and_below_the_sum() {
    let p = KernelParams::newtonian();
    let a = DiscreteMeasure::uniform(Arc::new(disc_cloud(0.5, &[1.0, 0.0, 0.0], 300).unwrap()), 1.0).unwrap();
    let b = DiscreteMeasure::uniform(Arc::new(disc_cloud(0.5, &[1.5, 0.0, 0.0], 300).unwrap()), 1.0).unwrap();
    let s = WeakEnergySettings::default();
    let nu = SignedDiscreteMeasure::new(a.clone(), b.clone()).unwrap();
    let d = energy_weak(&nu, &p, &s).unwrap().value;
    let ea = energy_weak_positive(&a, &p, &s).unwrap().value;
    let eb = energy_weak_positive(&b, &p, &s).unwrap().value;
    let cross = mutual_energy(&a, &b, &p, DiagonalPolicy::CellAverage);
    assert!(d > 0.0);
    assert!((d - (ea + eb - 2.0 * cross)).abs() < 0.03 * d, "{d} vs {}", ea + eb - 2.0 * cross);
}
