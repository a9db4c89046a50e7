use proptest::prelude::*;
use solwave::grid::{make_grid, GridScheme, RadialGrid};
use solwave::soliton::*;

fn default_grid() -> RadialGrid {
    make_grid(40.0, 2001, GridScheme::Uniform).unwrap()
}

#[test]
fn phi_at_origin_is_fourth_root_of_three() {
    assert!((phi_at(1.0, 0.0) - 1.316_074_012_952_492).abs() < 1e-12);
    assert!((resonance_at(1.0, 0.0) - 0.25 * 3f64.powf(0.25)).abs() < 1e-15);
    assert!((resonance_at(1.0, 0.0) - 0.32902).abs() < 1e-5);
}

#[test]
fn scaling_identity_holds_on_the_grid() {
    let g = default_grid();
    for &r in g.r() {
        let lhs = 2f64.sqrt() * phi_at(1.0, 2.0 * r);
        assert!((lhs - phi_at(4.0, r)).abs() < 1e-12);
    }
}

#[test]
fn elliptic_and_resonance_residuals_are_small() {
    // h = 0.01 keeps the fourth-order truncation below 1e-6 up to a = 1.4
    let g = make_grid(40.0, 4001, GridScheme::Uniform).unwrap();
    for a in [0.6, 1.0, 1.4] {
        let p = SolitonParams::new(a).unwrap();
        let e = elliptic_residual(p, &g).unwrap();
        let h = resonance_residual(p, &g).unwrap();
        assert!(e < 1e-6, "a = {a}: elliptic residual {e:e}");
        assert!(h < 1e-5, "a = {a}: resonance residual {h:e}");
    }
}

#[test]
fn resonance_far_field_matches_inverse_r_tail() {
    let target = -0.25 * 3f64.powf(0.25);
    for i in 0..=10 {
        let r = 30.0 + i as f64;
        let v = r * resonance_at(1.0, r);
        assert!((v - target).abs() < 0.01 * target.abs(), "r = {r}: {v}");
    }
}

#[test]
fn resonance_matches_central_difference() {
    let eps = 1e-4;
    for r in [0.0, 0.5, 1.0, 3.0, 10.0, 35.0] {
        let fd = (phi_at(1.0 + eps, r) - phi_at(1.0 - eps, r)) / (2.0 * eps);
        assert!((fd - resonance_at(1.0, r)).abs() < 1e-7, "r = {r}");
    }
}

#[test]
fn potential_profile_values_and_tail() {
    let g = default_grid();
    let v = potential(SolitonParams::new(1.0).unwrap(), &g);
    assert_eq!(potential_at(1.0, 0.0), -15.0);
    assert!(v.values().iter().all(|&x| x < 0.0));
    let worst = g
        .r()
        .iter()
        .zip(v.values())
        .filter(|(r, _)| **r >= 10.0)
        .map(|(r, v)| (r.powi(4) * v + 15.0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.5, "{worst}");
    let derivative_bound = g
        .r()
        .iter()
        .map(|&r| potential_derivative_at(1.0, r).abs() * (1.0 + r * r).powf(2.5))
        .fold(0.0, f64::max);
    assert!(derivative_bound.is_finite() && derivative_bound < 200.0);
    assert!(v.tail_constant() <= 15.0 + 1e-9);
}

#[test]
fn nonlinearity_edge_cases() {
    assert_eq!(nonlinearity(&[0.0], &[1.7]), vec![0.0]);
    assert!((nonlinearity(&[1.3], &[0.0])[0] - 1.3f64.powi(5)).abs() < 1e-14);
}

proptest! {
    #[test]
    fn nonlinearity_is_binomial_remainder(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let direct = (x + y).powi(5) - y.powi(5) - 5.0 * y.powi(4) * x;
        let n = nonlinearity_at(x, y);
        prop_assert!((n - direct).abs() <= 1e-12 * (1.0 + (x + y).powi(5).abs() + y.powi(5).abs()));
    }
}

#[test]
fn potential_difference_vanishes_for_constant_path() {
    let g = make_grid(40.0, 801, GridScheme::Uniform).unwrap();
    let path: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 1.0)).collect();
    assert_eq!(check_potential_difference(&path, 0.0, &g, 0.5, 2.0, 2.0).unwrap(), 0.0);
}

#[test]
fn potential_difference_ratio_is_refinement_stable() {
    let ratio = |n: usize| {
        let g = make_grid(40.0, n, GridScheme::Uniform).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let path: Vec<(f64, f64)> = times.iter().map(|&t| (t, 1.0 + 0.1 * (1.0 - (-t).exp()))).collect();
        let a_dot_l1 = 0.1 * (1.0 - (-10.0f64).exp());
        check_potential_difference(&path, a_dot_l1, &g, 0.5, 2.0, 2.0).unwrap()
    };
    let coarse = ratio(801);
    let fine = ratio(1601);
    assert!(coarse.is_finite() && coarse > 0.0);
    assert!((coarse - fine).abs() < 0.1 * fine, "{coarse} vs {fine}");
}

#[test]
fn potential_difference_linearizes_to_a_derivative() {
    let g = default_grid();
    let l2 = |f: &dyn Fn(f64) -> f64| profile_inner(&g, f, f).sqrt();
    let target = l2(&|r| potential_a_derivative_at(1.0, r));
    let mut prev = f64::INFINITY;
    for delta in [1e-2, 1e-3, 1e-4] {
        let q = l2(&|r| potential_at(1.0, r) - potential_at(1.0 + delta, r)) / delta;
        let err = (q - target).abs();
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-3 * target);
}

#[test]
fn rejects_nonpositive_scale() {
    assert!(SolitonParams::new(0.0).is_err());
    assert!(SolitonParams::new(1.6).unwrap().check_window().is_err());
}
