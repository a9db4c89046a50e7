use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solwave::grid::{make_frequency_grid, DEFAULT_RHO_MIN, make_grid, second_derivative4, FrequencyGrid, GridScheme, RadialGrid};
use solwave::jost::*;
use solwave::soliton::{potential, PotentialKind, PotentialProfile, SolitonParams};
use solwave::Error;

fn grids(n: usize, step: f64, rho_max: f64) -> (RadialGrid, FrequencyGrid) {
    (
        make_grid(40.0, n, GridScheme::Uniform).unwrap(),
        make_frequency_grid(DEFAULT_RHO_MIN, rho_max, step).unwrap(),
    )
}

fn soliton_table(n: usize, step: f64, rho_max: f64, derivs: bool) -> (RadialGrid, PotentialProfile, JostTable) {
    let (g, f) = grids(n, step, rho_max);
    let v = potential(SolitonParams::new(1.0).unwrap(), &g);
    let cfg = JostConfig { rho_derivatives: derivs, ..Default::default() };
    let t = solve_m(&v, &g, &f, cfg).unwrap();
    (g, v, t)
}

#[test]
fn free_case_is_exact() {
    let (g, f) = grids(2001, 0.025, 24.0);
    let v = PotentialProfile::zero(&g);
    let t = solve_m(&v, &g, &f, JostConfig::default()).unwrap();
    assert!(t.m.iter().all(|m| *m == Complex64::new(1.0, 0.0)));
    for c in c_plus(&t) {
        assert!((c - Complex64::new(0.0, -0.5)).norm() < 1e-15);
    }
    let e = e_tilde(&t).unwrap();
    let mut worst = 0.0f64;
    for ((i, j), val) in e.indexed_iter() {
        worst = worst.max((val - (g.r()[i] * f.rho()[j]).sin()).norm());
    }
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn scattering_coefficient_is_unimodular_and_dirichlet_holds() {
    let (_, _, t) = soliton_table(2001, 0.025, 24.0, false);
    for c in &t.c_plus {
        assert!((c.norm() - 0.5).abs() < 1e-12);
    }
    assert!(t.dirichlet_defect() < 1e-8);
    assert!(e_tilde(&t).is_ok());
}

#[test]
fn jost_modulus_below_gronwall_ceiling() {
    let (g, v, t) = soliton_table(2001, 0.1, 24.0, false);
    let ceiling = gronwall_ceiling(&v, &g);
    let sup = t.m.iter().map(|m| m.norm()).fold(0.0, f64::max);
    assert!(sup <= ceiling, "{sup} > {ceiling}");
}

#[test]
fn eigenfunctions_solve_the_radial_equation() {
    let (g, v, t) = soliton_table(2001, 0.025, 24.0, false);
    let h = g.spacing().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        // FD truncation grows like ρ⁶h⁴, so keep ρ moderate
        let j = rng.random_range(1..=200);
        let rho = t.rho()[j];
        let col: Vec<f64> = (1..t.r().len()).map(|i| t.e_real[(i, j)]).collect();
        let d2 = second_derivative4(&col, h);
        let i = rng.random_range(0..g.len() - 3);
        let res = -d2[i] + (v.values()[i] - rho * rho) * col[i];
        assert!(res.abs() < 1e-3 * (1.0 + rho * rho), "r = {}, ρ = {rho}: {res:e}", g.r()[i]);
    }
}

#[test]
fn far_field_amplitude_is_one() {
    let (_, _, t) = soliton_table(2001, 0.025, 24.0, false);
    assert!(amplitude_defect(&t, 30.0, 40.0, 0.5) < 0.02);
}

#[test]
fn volterra_fixed_point_matches_ode_solver() {
    let (g, v, t) = soliton_table(2001, 0.025, 24.0, false);
    for rho in [0.7, 3.0, 10.0] {
        let col = solve_m_volterra(&v, &g, rho).unwrap();
        let j = t.rho().iter().position(|&x| (x - rho).abs() < 1e-9).unwrap();
        let diff = (0..col.m.len()).map(|i| (col.m[i] - t.m[(i, j)]).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-3, "ρ = {rho}: {diff:e}");
        assert!(col.max_contraction < 1.0);
    }
}

#[test]
fn eigenfunctions_tend_to_sines_linearly_in_coupling() {
    let (g, f) = grids(1001, 0.1, 12.0);
    let dev = |eps: f64| {
        let v = PotentialProfile::new(PotentialKind::ScaledSoliton { a: 1.0, scale: eps }, &g);
        free_deviation(&solve_m(&v, &g, &f, JostConfig::default()).unwrap())
    };
    let (d1, d2) = (dev(1e-3), dev(2e-3));
    assert!(d1 > 0.0);
    assert!((d2 / d1 - 2.0).abs() < 0.05, "{d1:e} {d2:e}");
}

#[test]
fn strict_tail_tolerance_is_reported() {
    let (g, f) = grids(401, 0.1, 4.0);
    let v = potential(SolitonParams::new(1.0).unwrap(), &g);
    let cfg = JostConfig { tail_tol: 1e-4, ..Default::default() };
    assert!(matches!(solve_m(&v, &g, &f, cfg), Err(Error::TailTooLarge { .. })));
}

#[test]
fn symbol_bounds_are_refinement_stable() {
    let (_, _, coarse) = soliton_table(1001, 0.1, 12.0, true);
    let (_, _, fine) = soliton_table(2001, 0.05, 12.0, true);
    let a = check_m_bounds(&coarse, 0.5).unwrap().ratios();
    let b = check_m_bounds(&fine, 0.5).unwrap().ratios();
    for (x, y) in a.iter().zip(&b) {
        assert!(x.is_finite() && *x > 0.0);
        assert!((x - y).abs() < 0.1 * y, "{a:?} vs {b:?}");
    }
    let fa = f0_bounds(&coarse);
    let fb = f0_bounds(&fine);
    assert!((fa.constant - fb.constant).abs() < 0.1 * fb.constant);
}

#[test]
fn symbol_constants_shrink_with_threshold() {
    let (_, _, t) = soliton_table(1001, 0.1, 12.0, true);
    let mut prev = [f64::INFINITY; 4];
    for rho_star in [0.5, 1.0, 2.0, 4.0] {
        let r = check_m_bounds(&t, rho_star).unwrap().ratios();
        for (p, x) in prev.iter().zip(&r) {
            assert!(x <= p);
        }
        prev = r;
    }
}

#[test]
fn free_symbol_ratios_vanish() {
    let (g, f) = grids(401, 0.1, 4.0);
    let v = PotentialProfile::zero(&g);
    let t = solve_m(&v, &g, &f, JostConfig { rho_derivatives: true, ..Default::default() }).unwrap();
    assert_eq!(check_m_bounds(&t, 0.5).unwrap().ratios(), [0.0; 4]);
}
