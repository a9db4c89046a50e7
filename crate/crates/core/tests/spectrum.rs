use proptest::prelude::*;
use solwave::grid::{make_grid, GridScheme, RadialFunction, RadialGrid};
use solwave::soliton::{potential, resonance, PotentialProfile, SolitonParams};
use solwave::spectrum::*;
use solwave::Error;

fn setup() -> (RadialGrid, PotentialProfile, SpectralDecomposition) {
    let g = make_grid(40.0, 2001, GridScheme::Uniform).unwrap();
    let v = potential(SolitonParams::new(1.0).unwrap(), &g);
    let dec = SpectralDecomposition::build(&v, &g).unwrap();
    (g, v, dec)
}

#[test]
fn single_bound_state_with_consistent_solvers() {
    let (g, v, dec) = setup();
    assert_eq!(negative_count(&v, &g).unwrap(), 1);
    let e = &dec.eig;
    assert!(e.kappa > 0.0);
    assert!(e.matrix_shooting_defect() < 1e-6, "{:e}", e.matrix_shooting_defect());
    assert!((e.y.l2(&g) - 1.0).abs() < 1e-8);
    assert!(e.y.re()[0] > 0.0);
    assert!((e.decay_rate - e.kappa).abs() < 0.05 * e.kappa, "{} vs {}", e.decay_rate, e.kappa);
}

#[test]
fn free_operator_has_no_bound_state() {
    let g = make_grid(40.0, 401, GridScheme::Uniform).unwrap();
    let v = PotentialProfile::zero(&g);
    assert!(matches!(solve_eigen(&v, &g), Err(Error::NoNegativeEigenvalue)));
}

#[test]
fn kappa_squared_scales_linearly_in_a() {
    let base = kappa_sq_for(1.0, 40.0, 2001).unwrap();
    for a in [0.8, 1.25] {
        let k2 = kappa_sq_for(a, 40.0, 2001).unwrap();
        assert!((k2 - a * base).abs() < 1e-4 * a * base, "a = {a}: {k2} vs {}", a * base);
    }
}

#[test]
fn resonance_diagnostics() {
    let (g, v, dec) = setup();
    let phi = resonance(SolitonParams::new(1.0).unwrap(), &g);
    let rep = verify_zero_resonance(&v, &phi, &dec, 1e-5).unwrap();
    assert!(rep.residual < 1e-5);
    assert!(rep.growth_r2 > 0.99);
    assert!(rep.growth_slope > 0.0);
    assert!((rep.growth_slope - rep.growth_expected).abs() < 0.05 * rep.growth_expected);
    let c = 0.25 * 3f64.powf(0.25);
    assert!((rep.growth_expected - 4.0 * std::f64::consts::PI * c * c).abs() < 0.01 * rep.growth_expected);
    assert!(rep.weighted_increment_ratio < 0.8, "{}", rep.weighted_increment_ratio);
    assert!(rep.y_overlap.abs() < 1e-6, "{:e}", rep.y_overlap);
}

#[test]
fn projector_kills_bound_state() {
    let (g, _, dec) = setup();
    let out = dec.p_ac(dec.y());
    assert!(out.l2(&g) < 1e-10);
}

fn random_function(g: &RadialGrid, c: [f64; 4]) -> RadialFunction {
    RadialFunction::from_half_line(g, |r| {
        (c[0] * r + c[1] * r * r) * (-(c[2] * r).powi(2)).exp() + c[3] * r * (-r).exp()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn projector_is_idempotent_and_orthogonal(c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in 0.2f64..1.5, c3 in -1.0f64..1.0) {
        let g = make_grid(40.0, 801, GridScheme::Uniform).unwrap();
        let v = potential(SolitonParams::new(1.0).unwrap(), &g);
        let dec = SpectralDecomposition::build(&v, &g).unwrap();
        let f = random_function(&g, [c0, c1, c2, c3]);
        let once = dec.p_ac(&f);
        let twice = dec.p_ac(&once);
        prop_assert!(twice.sub(&once).l2(&g) < 1e-10 * (1.0 + f.l2(&g)));
        prop_assert!(dec.eigen_coeff(once.re()).abs() < 1e-10 * (1.0 + f.l2(&g)));
    }
}

#[test]
fn orthogonal_input_is_unchanged() {
    let (g, _, dec) = setup();
    let f = random_function(&g, [0.3, -0.2, 0.7, 0.1]);
    let f_perp = dec.p_ac(&f);
    let again = dec.p_ac(&f_perp);
    assert!(again.sub(&f_perp).l2(&g) < 1e-10);
}
