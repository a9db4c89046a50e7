use proptest::prelude::*;
use solwave::dft::*;
use solwave::grid::{make_frequency_grid, DEFAULT_RHO_MIN, make_grid, FrequencyFunction, GridScheme, RadialFunction, RadialGrid, SQRT_4PI};
use solwave::jost::JostConfig;
use solwave::soliton::{potential, SolitonParams};
use std::f64::consts::PI;
use std::sync::OnceLock;

struct Setup {
    grid: RadialGrid,
    t: DistortedTransform,
    free: DistortedTransform,
    bumps: BumpFamily,
}

fn build(n: usize, step: f64) -> Setup {
    let grid = make_grid(40.0, n, GridScheme::Uniform).unwrap();
    let freqs = make_frequency_grid(DEFAULT_RHO_MIN, 24.0, step).unwrap();
    let v = potential(SolitonParams::new(1.0).unwrap(), &grid);
    let t = DistortedTransform::build(&v, &grid, &freqs, JostConfig::default()).unwrap();
    let free = DistortedTransform::free(&grid, &freqs);
    let k0 = k0_for(&v, &grid, 24.0).unwrap();
    Setup { grid, t, free, bumps: BumpFamily::new(k0, 24.0).unwrap() }
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| build(2001, 0.025))
}

fn gaussian(grid: &RadialGrid, width: f64, center: f64) -> Vec<f64> {
    // odd in r, so its odd extension through the origin is smooth
    grid.r()
        .iter()
        .map(|&r| SQRT_4PI * r * ((-(r - center).powi(2) / (2.0 * width * width)).exp() + (-(r + center).powi(2) / (2.0 * width * width)).exp()))
        .collect()
}

fn compact_bump(grid: &RadialGrid, radius: f64) -> Vec<f64> {
    grid.r()
        .iter()
        .map(|&r| {
            let x = r / radius;
            if x < 1.0 {
                SQRT_4PI * r * (-1.0 / (1.0 - x * x)).exp()
            } else {
                0.0
            }
        })
        .collect()
}

fn rel(a: &[f64], b: &[f64], grid: &RadialGrid) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    grid.l2(&d) / grid.l2(b)
}

#[test]
fn free_transform_matches_closed_form() {
    let s = setup();
    let u: Vec<f64> = s.grid.r().iter().map(|&r| SQRT_4PI * r * (-r * r).exp()).collect();
    let g = forward(&RadialFunction::real(u), &s.free);
    let c = (2.0 / PI).sqrt() * SQRT_4PI * PI.sqrt() / 4.0;
    for (z, &rho) in g.values.iter().zip(s.free.freqs().rho()) {
        let exact = c * rho * (-rho * rho / 4.0).exp();
        assert!((z.re - exact).abs() < 1e-8 && z.im == 0.0, "ρ = {rho}");
    }
    assert!((s.free.c_norm() - (2.0 / PI).sqrt()).abs() < 1e-8);
}

#[test]
fn free_round_trip_is_exact() {
    let s = setup();
    let u: Vec<f64> = s.grid.r().iter().map(|&r| SQRT_4PI * r * (-r * r).exp()).collect();
    let back = s.free.synthesize(&s.free.coefficients(&u));
    let worst = back.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn bound_state_is_annihilated() {
    let s = setup();
    let y = s.t.dec().unwrap().y().re().to_vec();
    assert!(transform_norm(&y, &s.t) < 1e-3 * s.grid.l2(&y));
}

#[test]
fn generalized_eigenfunctions_are_orthogonal_to_bound_state() {
    let s = setup();
    let y = s.t.dec().unwrap().y().re();
    let coeffs = s.t.coefficients(y);
    let worst = coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn adjoint_after_transform_is_continuous_projection() {
    let s = setup();
    let dec = s.t.dec().unwrap();
    for radius in [3.0, 4.0, 5.0] {
        let u = compact_bump(&s.grid, radius);
        let back = s.t.synthesize(&s.t.coefficients(&u));
        let e = rel(&back, &dec.p_ac_values(&u), &s.grid);
        assert!(e < 1e-3, "R = {radius}: {e:e}");
    }
}

#[test]
fn transform_after_adjoint_is_identity_on_band() {
    let s = setup();
    let b = BumpFamily { width: 0.5, k0: 1, k_max: 10 };
    let g: Vec<f64> = s.t.freqs().rho().iter().map(|&r| b.psi((r - 1.0) / 11.0 * 1.0 - 0.0) * (0.3 * r).sin()).collect();
    let again = s.t.coefficients(&s.t.synthesize(&g));
    let num: f64 = again.iter().zip(&g).zip(s.t.freqs().w()).map(|((a, b), w)| w * (a - b).powi(2)).sum();
    let den: f64 = g.iter().zip(s.t.freqs().w()).map(|(b, w)| w * b * b).sum();
    assert!((num / den).sqrt() < 1e-3);
}

#[test]
fn inverse_of_forward_round_trips_the_phase() {
    let s = setup();
    let u = gaussian(&s.grid, 0.7, 1.5);
    let g = forward(&RadialFunction::real(u.clone()), &s.t);
    let back = inverse(&g, &s.t);
    let pac = s.t.dec().unwrap().p_ac_values(&u);
    assert!(rel(back.re(), &pac, &s.grid) < 1e-3);
    let im = back.im().map_or(0.0, |im| s.grid.l2(im));
    assert!(im < 1e-10 * s.grid.l2(&u));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn plancherel_holds_on_smooth_data(width in 0.3f64..2.0, center in 0.0f64..6.0) {
        let s = setup();
        let u = gaussian(&s.grid, width, center);
        prop_assert!(plancherel_defect(&u, &s.t) < 1e-3);
    }

    #[test]
    fn multipliers_are_self_adjoint(a in 0.1f64..3.0, b in -2.0f64..2.0, w1 in 0.4f64..1.5, w2 in 0.4f64..1.5) {
        let s = setup();
        let f = RadialFunction::real(gaussian(&s.grid, w1, 1.0));
        let g = RadialFunction::real(gaussian(&s.grid, w2, 2.0));
        let m = |r: f64| num_complex::Complex64::new((a * r).cos(), b * (a * r).sin() / (1.0 + r));
        let mf = multiplier(&f, m, &s.t);
        let mg = multiplier(&g, |r| m(r).conj(), &s.t);
        let lhs = s.grid.inner(mf.re(), g.re());
        let rhs = s.grid.inner(f.re(), mg.re());
        let lhs_im = -mf.im().map_or(0.0, |im| s.grid.inner(im, g.re()));
        let rhs_im = mg.im().map_or(0.0, |im| s.grid.inner(f.re(), im));
        prop_assert!((lhs - rhs).abs() < 1e-6 && (lhs_im - rhs_im).abs() < 1e-6);
    }
}

#[test]
fn unit_multiplier_is_continuous_projection() {
    let s = setup();
    let u = gaussian(&s.grid, 0.8, 0.0);
    let out = multiplier(&RadialFunction::real(u.clone()), |_| 1.0.into(), &s.t);
    assert!(rel(out.re(), &s.t.dec().unwrap().p_ac_values(&u), &s.grid) < 1e-3);
}

#[test]
fn squared_frequency_multiplier_applies_the_operator() {
    let s = setup();
    let dec = s.t.dec().unwrap();
    let u = dec.p_ac_values(&gaussian(&s.grid, 1.0, 0.0));
    let out = s.t.real_multiplier(&u, &s.t.symbol(|r| r * r));
    let h = s.grid.spacing().unwrap();
    let d2 = solwave::grid::second_derivative4(&u, h);
    let v = potential(SolitonParams::new(1.0).unwrap(), &s.grid);
    let hu: Vec<f64> = (0..u.len()).map(|i| -d2[i] + v.values()[i] * u[i]).collect();
    assert!(rel(&out, &hu, &s.grid) < 1e-3);
}

#[test]
fn multipliers_compose() {
    let s = setup();
    let u = gaussian(&s.grid, 0.9, 1.0);
    let m1 = s.t.symbol(|r| (-0.1 * r).exp());
    // the resonance makes ĝ(0) ≠ 0; vanishing at ρ = 0 keeps the middle synthesis inside the box
    let m2 = s.t.symbol(|r| r * r / (1.0 + r * r) * (0.7 * r).cos());
    let m12: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| a * b).collect();
    let lhs = s.t.real_multiplier(&s.t.real_multiplier(&u, &m2), &m1);
    let rhs = s.t.real_multiplier(&u, &m12);
    let e = rel(&lhs, &rhs, &s.grid);
    assert!(e < 1e-6, "{e:e}");
}

#[test]
fn bumps_partition_unity() {
    let s = setup();
    assert!(s.bumps.partition_defect(s.t.freqs()) < 1e-10);
    assert!(s.bumps.psi(-0.5) == 0.0 && s.bumps.psi(1.5) == 0.0 && s.bumps.psi(0.5) == 1.0);
    if s.bumps.k0 > 1 {
        assert!(project_k(&gaussian(&s.grid, 1.0, 0.0), 1, &s.t, &s.bumps).is_err());
    }
}

#[test]
fn projections_resolve_the_identity() {
    let s = setup();
    let dec = s.t.dec().unwrap();
    let u = gaussian(&s.grid, 0.25, 2.0);
    let mut sum = project_k(&u, 0, &s.t, &s.bumps).unwrap();
    for k in s.bumps.ks() {
        for (a, b) in sum.iter_mut().zip(project_k(&u, k, &s.t, &s.bumps).unwrap()) {
            *a += b;
        }
    }
    let c = dec.eigen_coeff(&u);
    for (a, y) in sum.iter_mut().zip(dec.y().re()) {
        *a += c * y;
    }
    assert!(rel(&sum, &u, &s.grid) < 1e-3);
}

#[test]
fn distant_projections_are_orthogonal() {
    let s = setup();
    let u = gaussian(&s.grid, 0.15, 1.0);
    let k0 = s.bumps.k0;
    let pieces: Vec<Vec<f64>> = (k0..k0 + 5).map(|k| project_k(&u, k, &s.t, &s.bumps).unwrap()).collect();
    let scale = s.grid.inner(&u, &u);
    for a in 0..pieces.len() {
        for b in a + 2..pieces.len() {
            assert!(s.grid.inner(&pieces[a], &pieces[b]).abs() < 1e-6 * scale);
        }
    }
}

#[test]
fn bernstein_growth_matches_predicted_exponent() {
    let s = setup();
    let u = gaussian(&s.grid, 0.1, 0.0);
    let ks: Vec<usize> = (s.bumps.k0..s.bumps.k0 + 9).collect();
    let ratios = bernstein_ratios(&u, &ks, 2.0, f64::INFINITY, &s.t, &s.bumps).unwrap();
    let (slope, _) = loglog_slope(&ks, &ratios);
    assert!((slope - 1.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn projections_are_uniformly_bounded_in_lp() {
    let fine = build(4001, 0.0125);
    let s = setup();
    let ks: Vec<usize> = (s.bumps.k0..s.bumps.k0 + 9).collect();
    let worst = |st: &Setup| {
        let u = gaussian(&st.grid, 0.15, 0.0);
        projection_lp_ratios(&u, &ks, 2.5, &st.t, &st.bumps).unwrap().into_iter().fold(0.0, f64::max)
    };
    let (a, b) = (worst(s), worst(&fine));
    assert!(a.is_finite() && a < 10.0);
    assert!((a - b).abs() < 0.1 * b, "{a} vs {b}");
}

#[test]
fn weighted_square_function_is_bounded_and_stable() {
    let s = setup();
    let coarse = {
        let u = gaussian(&s.grid, 0.15, 0.0);
        check_weighted_projection(&u, 0.5, 0.5, &s.t, &s.free, &s.bumps).unwrap()
    };
    let fine = build(4001, 0.0125);
    let u = gaussian(&fine.grid, 0.15, 0.0);
    let refined = check_weighted_projection(&u, 0.5, 0.5, &fine.t, &fine.free, &fine.bumps).unwrap();
    assert!(coarse.ratio.is_finite() && coarse.ratio > 0.0);
    assert!((coarse.ratio - refined.ratio).abs() < 0.15 * refined.ratio);
}

#[test]
fn weighted_square_function_single_piece() {
    let s = setup();
    let u = gaussian(&s.grid, 0.15, 0.0);
    let piece = project_k(&u, s.bumps.k0 + 3, &s.t, &s.bumps).unwrap();
    let rep = check_weighted_projection(&piece, 0.5, 0.0, &s.t, &s.free, &s.bumps).unwrap();
    assert!(rep.ratio.is_finite() && rep.ratio > 0.0);
}

#[test]
fn unweighted_limit_recovers_square_function_constant() {
    let s = setup();
    let u = gaussian(&s.grid, 0.15, 0.0);
    let rep = check_weighted_projection(&u, 1e-3, 0.0, &s.t, &s.free, &s.bumps).unwrap();
    let hi = prefilter_high(&u, &s.free, &s.bumps);
    let c = square_function_constant(&hi, &s.t, &s.bumps);
    assert!((rep.ratio - c).abs() < 0.05 * c, "{} vs {c}", rep.ratio);
}

#[test]
fn coercivity_ratios_are_bounded_and_stable() {
    let s = setup();
    let fine = build(4001, 0.0125);
    let band = BumpFamily { width: 0.5, k0: 1, k_max: 10 };
    for sp in [0.25, 0.5] {
        let ratio = |st: &Setup| {
            let g: Vec<f64> = st.t.freqs().rho().iter().map(|&r| band.psi((r - 1.0) / 11.0)).collect();
            coercivity_ratio(&g, sp, &st.t, &st.free)
        };
        let (a, b) = (ratio(s), ratio(&fine));
        assert!(a > 0.5 && a < 2.0, "s = {sp}: {a}");
        assert!((a - b).abs() < 0.05 * b);
    }
}

#[test]
fn frequency_function_round_trip_is_identity_for_free_case() {
    let s = setup();
    let g = FrequencyFunction {
        values: s.free.freqs().rho().iter().map(|&r| (r * (-r * r / 8.0).exp()).into()).collect(),
    };
    let back = forward(&inverse(&g, &s.free), &s.free);
    let worst = back.values.iter().zip(&g.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst:e}");
}
