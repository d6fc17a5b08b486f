mod common;

use common::prolate_capacity;
use riesz_condenser::kernels::KernelParams;
use riesz_condenser::thinness::{rotation_body_piece, rotation_body_shell, wiener_test, Profile, Thinness};

#[test]
fn shell_capacity_is_subadditive() {
    let p = KernelParams::newtonian();
    let profile = Profile::Power { s: 0.5 };
    let whole = rotation_body_piece(&profile, 4.0, 16.0).unwrap().capacity(&p).unwrap().value();
    let a = rotation_body_piece(&profile, 4.0, 8.0).unwrap().capacity(&p).unwrap().value();
    let b = rotation_body_piece(&profile, 8.0, 16.0).unwrap().capacity(&p).unwrap().value();
    assert!(whole <= a + b, "{whole} > {a} + {b}");
    assert!(whole >= a.max(b));
}

#[test]
fn cylinder_capacity_lies_between_spheroid_bounds() {
    let p = KernelParams::newtonian();
    let profile = Profile::Power { s: 0.0 };
    for k in 1..=5 {
        let len = 2f64.powi(k);
        let c = rotation_body_shell(&profile, k as u32, 2.0).unwrap().capacity(&p).unwrap().value();
        let lo = prolate_capacity(0.5 * len, 1.0);
        let hi = prolate_capacity(0.5 * len * 2f64.sqrt(), 2f64.sqrt());
        assert!(c >= lo && c <= hi, "k={k}: {c} not in [{lo}, {hi}]");
    }
}

#[test]
fn profiles_are_classified() {
    let p = KernelParams::newtonian();
    let cases = [
        (Profile::Power { s: 0.0 }, Thinness::NotThin),
        (Profile::Exponential { s: 1.0 }, Thinness::ThinInfiniteCapacity),
        (Profile::Exponential { s: 2.0 }, Thinness::FiniteCapacity),
    ];
    for (profile, want) in cases {
        let r = wiener_test(&profile, &p, 2.0, 6).unwrap();
        assert_eq!(r.classification, want, "{profile:?}");
        assert_eq!(r.shells.len(), 6);
    }
}

#[test]
fn terms_shrink_faster_for_thinner_bodies() {
    let p = KernelParams::newtonian();
    let slow = wiener_test(&Profile::Exponential { s: 1.0 }, &p, 2.0, 6).unwrap();
    let fast = wiener_test(&Profile::Exponential { s: 2.0 }, &p, 2.0, 6).unwrap();
    assert!(fast.term_exponent > slow.term_exponent);
    let last = |r: &riesz_condenser::thinness::WienerReport| r.shells.last().unwrap().ln_term;
    assert!(last(&fast) < last(&slow));
}

#[test]
fn invalid_profiles_and_shells_are_rejected() {
    let p = KernelParams::newtonian();
    assert!(wiener_test(&Profile::Exponential { s: -1.0 }, &p, 2.0, 6).is_err());
    assert!(rotation_body_shell(&Profile::Power { s: 0.0 }, 0, 2.0).is_err());
    assert!(rotation_body_shell(&Profile::Power { s: 0.0 }, 1, 1.0).is_err());
}
