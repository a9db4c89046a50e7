use solwave::dft::{k0_for, BumpFamily, DistortedTransform};
use solwave::grid::{make_frequency_grid, DEFAULT_RHO_MIN, make_grid, GridScheme, RadialGrid, SQRT_4PI};
use solwave::jost::JostConfig;
use solwave::randomize::*;
use solwave::soliton::{potential, SolitonParams};
use std::sync::OnceLock;

struct Setup {
    grid: RadialGrid,
    t: DistortedTransform,
    free: DistortedTransform,
    bumps: BumpFamily,
    data: DataPair,
}

fn gaussian(grid: &RadialGrid, width: f64, center: f64, amp: f64) -> Vec<f64> {
    grid.r()
        .iter()
        .map(|&r| {
            let g = |c: f64| (-(r - c).powi(2) / (2.0 * width * width)).exp();
            amp * SQRT_4PI * r * (g(center) + g(-center))
        })
        .collect()
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let grid = make_grid(40.0, 2001, GridScheme::Uniform).unwrap();
        let freqs = make_frequency_grid(DEFAULT_RHO_MIN, 24.0, 0.025).unwrap();
        let v = potential(SolitonParams::new(1.0).unwrap(), &grid);
        let t = DistortedTransform::build(&v, &grid, &freqs, JostConfig::default()).unwrap();
        let free = DistortedTransform::free(&grid, &freqs);
        let bumps = BumpFamily::new(k0_for(&v, &grid, 24.0).unwrap(), 24.0).unwrap();
        let f = DataPair::new(gaussian(&grid, 0.2, 1.0, 1.0), gaussian(&grid, 0.25, 2.0, 0.5)).unwrap();
        let data = decompose(&f, &t, &free, &bumps).unwrap();
        Setup { grid, t, free, bumps, data }
    })
}

fn params() -> MsParams {
    MsParams::new(0.9, 0.9, 0.1, 1e-2).unwrap()
}

#[test]
fn draws_are_seed_deterministic() {
    assert_eq!(RandomDraw::new(42, 10), RandomDraw::new(42, 10));
    assert_ne!(RandomDraw::new(42, 10), RandomDraw::new(43, 10));
    let a = draw_batch(100, 5, 8);
    assert_eq!(a[3], RandomDraw::new(103, 8));
}

#[test]
fn draws_have_standard_normal_moments() {
    let batch = draw_batch(0, 4000, 10);
    let xs: Vec<f64> = batch.iter().flat_map(|d| d.g.iter().chain(&d.h).copied()).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let fourth = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    assert!(mean.abs() < 5.0 / n.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "var {var}");
    assert!((fourth - 3.0).abs() < 5.0 * (96.0 / n).sqrt(), "fourth {fourth}");
}

#[test]
fn params_are_validated() {
    assert!(MsParams::new(0.8, 0.9, 0.1, 1e-2).is_err());
    let err = MsParams::new(0.9, 0.3, 0.1, 1e-2).unwrap_err().to_string();
    assert!(err.contains("s1 > 3·nu > 0"), "{err}");
    assert!(MsParams::new(0.9, 0.9, 0.0, 1e-2).is_err());
    assert!(MsParams::new(0.9, 0.9, 0.1, 0.0).is_err());
}

#[test]
fn split_removes_nothing_from_high_frequency_data() {
    let s = setup();
    let lo_edge = s.bumps.k0 as f64 + s.bumps.width + 1.2;
    let g: Vec<f64> = s
        .free
        .freqs()
        .rho()
        .iter()
        .map(|&r| s.bumps.psi((r - lo_edge) / 3.0) * (0.4 * r).cos())
        .collect();
    let u = s.free.synthesize(&g);
    let f = split_lo_hi(&DataPair::new(u.clone(), u.clone()).unwrap(), &s.bumps, &s.free);
    let lo = &f.split.unwrap().lo;
    assert!(s.grid.l2(&lo[0]) < 1e-6 * s.grid.l2(&u));
}

#[test]
fn split_is_linear_and_exact() {
    let s = setup();
    let f = split_lo_hi(&s.data, &s.bumps, &s.free);
    let sp = f.split.unwrap();
    for c in 0..2 {
        let src = s.data.components()[c];
        let worst = (0..src.len()).map(|i| (sp.lo[c][i] + sp.hi[c][i] - src[i]).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-13);
        let sum = s.grid.l2(&sp.lo[c]) + s.grid.l2(&sp.hi[c]);
        assert!(sum >= s.grid.l2(src) * (1.0 - 1e-12));
    }
}

#[test]
fn split_is_idempotent_on_plateau_data() {
    let s = setup();
    let u = gaussian(&s.grid, 1.0, 0.0, 1.0);
    let once = split_lo_hi(&DataPair::new(u.clone(), u).unwrap(), &s.bumps, &s.free).split.unwrap().lo;
    let twice = split_lo_hi(&DataPair::new(once[0].clone(), once[1].clone()).unwrap(), &s.bumps, &s.free)
        .split
        .unwrap()
        .lo;
    let worst = once[0].iter().zip(&twice[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn decomposition_recomposes() {
    let s = setup();
    let dec = s.data.require_decomposition().unwrap();
    assert!(dec.truncation_tail < 1e-3);
    assert_eq!(dec.ks.first(), Some(&s.bumps.k0));
    assert!(s.data.recomposition_error(&s.t).unwrap() < 1e-3);
}

#[test]
fn unit_coefficients_recover_the_data() {
    let s = setup();
    let modes = s.bumps.ks().count();
    let f = randomize(&s.data, &RandomDraw::constant(1.0, modes)).unwrap();
    let err = (s.grid.l2(&s.data.f0.iter().zip(&f.f0).map(|(a, b)| a - b).collect::<Vec<_>>())) / s.grid.l2(&s.data.f0);
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn zero_coefficients_leave_the_deterministic_part() {
    let s = setup();
    let modes = s.bumps.ks().count();
    let f = randomize(&s.data, &RandomDraw::constant(0.0, modes)).unwrap();
    let dec = s.data.require_decomposition().unwrap();
    let eigen = dec.eigen_part();
    for c in 0..2 {
        let worst = (0..f.f0.len())
            .map(|i| (f.components()[c][i] - eigen[c][i] - dec.low[c][i]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-14);
    }
}

#[test]
fn randomization_preserves_orthogonality_scalar() {
    let s = setup();
    let dec = s.data.require_decomposition().unwrap();
    let y = &dec.y;
    let yy = s.grid.inner(y, y);
    let reference = orthogonality_scalar(&s.data.f0, &s.data.f1, &s.t).unwrap();
    assert!((reference - dec.orthogonality).abs() < 1e-12);
    for d in draw_batch(1000, 100, dec.ks.len()) {
        let f = randomize(&s.data, &d).unwrap();
        let got = orthogonality_scalar(&f.f0, &f.f1, &s.t).unwrap();
        assert!((got - reference * yy).abs() < 1e-6, "seed {}: {got} vs {reference}", d.seed);
    }
}

#[test]
fn randomization_does_not_regularize() {
    let s = setup();
    let p = params();
    let modes = s.bumps.ks().count();
    let reference = hs_norm(&s.data.f0, &s.data.f1, p.s, &s.free);
    let draws = draw_batch(5000, 200, modes);
    let mut mean = 0.0;
    let mut worst_xs: f64 = 0.0;
    for d in &draws {
        let f = randomize(&s.data, d).unwrap();
        mean += hs_norm(&f.f0, &f.f1, p.s, &s.free) / draws.len() as f64;
        let xs = norm_xs(&f, &p, &s.free);
        assert!(xs.is_finite());
        worst_xs = worst_xs.max(xs);
    }
    let ratio = mean / reference;
    assert!((0.5..=2.0).contains(&ratio), "{ratio}");
    assert!(worst_xs.is_finite());
}

#[test]
fn xs_norm_basic_properties() {
    let s = setup();
    let p = params();
    assert_eq!(norm_xs(&DataPair::zeros(s.grid.len()), &p, &s.free), 0.0);
    let f0 = gaussian(&s.grid, 0.5, 1.0, 1.0);
    let f = DataPair::new(f0.clone(), vec![0.0; f0.len()]).unwrap();
    let tiny_nu = MsParams { nu: 1e-9, ..p };
    assert!(norm_xs(&f, &tiny_nu, &s.free) >= hs_norm(&f0, &f.f1, p.s, &s.free));
}

#[test]
fn xs_norm_is_refinement_stable() {
    let p = params();
    let value = |n: usize, step: f64| {
        let grid = make_grid(40.0, n, GridScheme::Uniform).unwrap();
        let freqs = make_frequency_grid(DEFAULT_RHO_MIN, 24.0, step).unwrap();
        let free = DistortedTransform::free(&grid, &freqs);
        let f = DataPair::new(gaussian(&grid, 0.4, 1.0, 1.0), gaussian(&grid, 0.6, 0.5, 1.0)).unwrap();
        norm_xs(&f, &p, &free)
    };
    let (a, b) = (value(2001, 0.025), value(4001, 0.0125));
    assert!((a - b).abs() < 0.02 * b, "{a} vs {b}");
}

#[test]
fn membership_examples() {
    let s = setup();
    let p = params();
    let tails = TailConstants { c: 1.0, big_c: std::f64::consts::E };
    let zero = decompose(&DataPair::zeros(s.grid.len()), &s.t, &s.free, &s.bumps).unwrap();
    let rep = membership_ms(&zero, &p, tails, 1e-8, &s.t, &s.free).unwrap();
    assert!(rep.inside && rep.orthogonality == 0.0, "{:?}", rep.reasons);

    let dec = s.t.dec().unwrap();
    let kappa = dec.kappa();
    let y: Vec<f64> = dec.y().re().iter().map(|v| 1e-6 * v).collect();
    let minus: Vec<f64> = y.iter().map(|v| -kappa * v).collect();
    let plus: Vec<f64> = y.iter().map(|v| kappa * v).collect();
    let good = decompose(&DataPair::new(y.clone(), minus).unwrap(), &s.t, &s.free, &s.bumps).unwrap();
    let rep = membership_ms(&good, &p, tails, 1e-8, &s.t, &s.free).unwrap();
    assert!(rep.orthogonality.abs() < 1e-16);
    assert!(rep.inside, "{:?}", rep.reasons);

    let bad = decompose(&DataPair::new(y, plus).unwrap(), &s.t, &s.free, &s.bumps).unwrap();
    let rep = membership_ms(&bad, &p, tails, 1e-8, &s.t, &s.free).unwrap();
    assert!(!rep.inside && rep.reasons.iter().any(|r| r.contains("orthogonality")));
}
