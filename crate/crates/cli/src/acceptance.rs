//! The ten acceptance criteria, each measured at its stated tolerance.

use crate::commands::{jost_refinement, plancherel_suite_defect};
use crate::context::{gaussian, rough_data, tail_data, Context, Setup};
use crate::error::CliResult;
use crate::records::AcceptanceRow;
use serde::Serialize;
use solwave::dft::{bernstein_ratios, forward, loglog_slope, project_k, projection_lp_ratios, transform_norm, DistortedTransform};
use solwave::grid::{make_frequency_grid, make_grid, GridScheme, RadialFunction, RadialGrid, SpaceTimeField, SQRT_4PI};
use solwave::jost::{e_tilde, solve_m, JostConfig};
use solwave::kernels::{certification_points, sample_kernel, KernelEvaluator};
use solwave::modulation::{picard_solve, validate_solution, FixedPointConfig, ModulationProblem, PicardRun, Scenario, ValidationReport};
use solwave::propagator::{evolve_w, fit_tail, piece_flows, random_flow_norms, tail_experiment, z_norm, FlowConfig};
use solwave::randomize::{draw_batch, hs_norm, norm_xs, orthogonality_scalar, randomize, DataPair, RandomDraw};
use solwave::soliton::{elliptic_residual, resonance_residual, PotentialProfile, SolitonParams};
use solwave::spectrum::{kappa_sq_for, negative_count};
use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Limit {
    Below(f64),
    Above(f64),
    Within(f64, f64),
}

impl Limit {
    fn holds(&self, v: f64) -> bool {
        match *self {
            Limit::Below(b) => v < b,
            Limit::Above(b) => v > b,
            Limit::Within(lo, hi) => (lo..=hi).contains(&v),
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Below(b) => write!(f, "< {b:e}"),
            Limit::Above(b) => write!(f, "> {b:e}"),
            Limit::Within(lo, hi) => write!(f, "in [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub limit: Limit,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub metrics: Vec<Metric>,
    /// Wall-clock time; printed but kept out of artifacts so reruns hash identically.
    #[serde(skip)]
    pub seconds: f64,
    /// Wall-clock target; enforced by the acceptance test target only.
    #[serde(skip)]
    pub budget_seconds: f64,
    pub error: Option<String>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!("{status} [{:>2}] {} ({:.1} s, target {} s)", self.id, self.title, self.seconds, self.budget_seconds);
        if let Some(e) = &self.error {
            s.push_str(&format!("\n       error: {e}"));
        }
        for m in &self.metrics {
            let mark = if m.pass { " " } else { "!" };
            s.push_str(&format!("\n     {mark} {} = {:.6e} ({})", m.name, m.value, m.limit));
        }
        s
    }

    pub fn rows(&self) -> Vec<AcceptanceRow> {
        self.metrics
            .iter()
            .map(|m| AcceptanceRow { criterion: self.id, metric: m.name.clone(), value: m.value, limit: m.limit.to_string(), pass: m.pass })
            .collect()
    }
}

#[derive(Default)]
struct Metrics(Vec<Metric>);

impl Metrics {
    fn check(&mut self, name: impl Into<String>, value: f64, limit: Limit) {
        let pass = value.is_finite() && limit.holds(value);
        self.0.push(Metric { name: name.into(), value, limit, pass });
    }
}

/// `(id, title, target seconds)` in dependency order.
pub const CRITERIA: [(u8, &str, f64); 10] = [
    (1, "free-case exactness", 10.0),
    (2, "soliton identities", 5.0),
    (3, "spectrum", 30.0),
    (4, "Plancherel and unitarity", 30.0),
    (5, "Jost bounds", 120.0),
    (6, "kernel decay", 300.0),
    (7, "projection calculus", 120.0),
    (8, "randomization", 60.0),
    (9, "probabilistic tails", 600.0),
    (10, "fixed point", 480.0),
];

/// Sample sizes; `quick` trades statistical depth for time and keeps every check.
#[derive(Debug, Clone, Copy)]
pub struct Effort {
    pub kernel_samples: usize,
    pub orthogonality_draws: usize,
    pub regularity_draws: usize,
    pub tail_draws: usize,
    pub refine_fixed_point: bool,
}

impl Effort {
    pub fn new(ctx: &Context, quick: bool) -> Self {
        if quick {
            Effort { kernel_samples: 2000, orthogonality_draws: 20, regularity_draws: 50, tail_draws: 300, refine_fixed_point: false }
        } else {
            Effort {
                kernel_samples: ctx.cfg.kernels.samples,
                orthogonality_draws: 100,
                regularity_draws: 200,
                tail_draws: ctx.cfg.tails.draws,
                refine_fixed_point: true,
            }
        }
    }
}

pub fn run_criterion(ctx: &Context, id: u8, effort: Effort) -> CriterionOutcome {
    let (_, title, budget) = CRITERIA.iter().copied().find(|c| c.0 == id).expect("criterion id in 1..=10");
    let start = Instant::now();
    let mut m = Metrics::default();
    let result = match id {
        1 => free_case(ctx, &mut m),
        2 => soliton_identities(ctx, &mut m),
        3 => spectrum(ctx, &mut m),
        4 => plancherel(ctx, &mut m),
        5 => jost_bounds(ctx, &mut m),
        6 => kernel_decay(ctx, effort, &mut m),
        7 => projections(ctx, &mut m),
        8 => randomization(ctx, effort, &mut m),
        9 => tails(ctx, effort, &mut m),
        _ => fixed_point(ctx, effort, &mut m),
    };
    let error = result.err().map(|e| e.to_string());
    CriterionOutcome {
        id,
        title,
        pass: error.is_none() && !m.0.is_empty() && m.0.iter().all(|x| x.pass),
        metrics: m.0,
        seconds: start.elapsed().as_secs_f64(),
        budget_seconds: budget,
        error,
    }
}

/// Runs every criterion in order, reporting each as it finishes.
pub fn run_all(ctx: &Context, quick: bool, mut report: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    let effort = Effort::new(ctx, quick);
    CRITERIA
        .iter()
        .map(|&(id, _, _)| {
            let out = run_criterion(ctx, id, effort);
            report(&out);
            out
        })
        .collect()
}

fn rel_l2(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    grid.l2(&d) / grid.l2(b)
}

fn free_case(ctx: &Context, m: &mut Metrics) -> CliResult<()> {
    let g = &ctx.cfg.grid;
    let grid = make_grid(g.r_max, g.points, GridScheme::Uniform)?;
    let freqs = make_frequency_grid(g.rho_min, g.rho_max, g.rho_step)?;
    let table = solve_m(&PotentialProfile::zero(&grid), &grid, &freqs, JostConfig::default())?;
    let e = e_tilde(&table)?;
    let worst = e
        .indexed_iter()
        .map(|((i, j), z)| (z - (grid.r()[i] * freqs.rho()[j]).sin()).norm())
        .fold(0.0, f64::max);
    m.check("max |e(r,rho) - sin(r rho)|", worst, Limit::Below(1e-10));

    let t = DistortedTransform::new(table, None, &grid, &freqs)?;
    let u: Vec<f64> = grid.r().iter().map(|&r| SQRT_4PI * r * (-r * r).exp()).collect();
    let c = (2.0 / PI).sqrt() * SQRT_4PI * PI.sqrt() / 4.0;
    let sine = forward(&RadialFunction::real(u), &t)
        .values
        .iter()
        .zip(freqs.rho())
        .map(|(z, &rho)| (z - c * rho * (-rho * rho / 4.0).exp()).norm())
        .fold(0.0, f64::max);
    m.check("max |transform - sine transform| (Gaussian)", sine, Limit::Below(1e-8));

    let odd = |x: f64| x * (-0.5 * x * x).exp();
    let even = |x: f64| (-0.5 * x * x).exp();
    let f = DataPair::new(grid.r().iter().map(|&r| odd(r)).collect(), grid.r().iter().map(|&r| 0.5 * odd(r)).collect())?;
    let cfg = FlowConfig::new(vec![0.5, 1.0, 3.0, 6.0, 10.0], 10.0, 0.75)?;
    let u = evolve_w(&f, &cfg, &t)?;
    let mut worst = 0.0f64;
    for (n, &time) in cfg.times.iter().enumerate() {
        let exact: Vec<f64> = grid
            .r()
            .iter()
            .map(|&r| 0.5 * (odd(r + time) + odd(r - time)) + 0.25 * (even(r - time) - even(r + time)))
            .collect();
        worst = worst.max(rel_l2(&grid, &u.slice(n).into_re(), &exact));
    }
    m.check("max relative L2 error of W(t) vs d'Alembert", worst, Limit::Below(1e-6));
    Ok(())
}

fn soliton_identities(ctx: &Context, m: &mut Metrics) -> CliResult<()> {
    // Refined once so the fourth-order stencil error stays below 1e-6 up to a = 1.4.
    let g = &ctx.cfg.grid;
    let grid = make_grid(g.r_max, 2 * g.points - 1, GridScheme::Uniform)?;
    for a in [0.6, 1.0, 1.4] {
        let p = SolitonParams::new(a)?;
        m.check(format!("a = {a}: |lap phi + phi^5|"), elliptic_residual(p, &grid)?, Limit::Below(1e-6));
        m.check(format!("a = {a}: |H d_a phi|"), resonance_residual(p, &grid)?, Limit::Below(1e-5));
    }
    Ok(())
}

fn spectrum(ctx: &Context, m: &mut Metrics) -> CliResult<()> {
    let s = ctx.main()?;
    let eig = &s.t.require_dec()?.eig;
    m.check("radial negative eigenvalues", negative_count(&s.v, &s.grid)? as f64, Limit::Within(1.0, 1.0));
    m.check("matrix vs shooting kappa^2 (relative)", eig.matrix_shooting_defect(), Limit::Below(1e-6));
    m.check("|decay rate / kappa - 1|", (eig.decay_rate / eig.kappa - 1.0).abs(), Limit::Below(0.05));
    let g = &ctx.cfg.grid;
    let base = kappa_sq_for(1.0, g.r_max, g.points)?;
    for a in [0.8, 1.25] {
        let k2 = kappa_sq_for(a, g.r_max, g.points)?;
        m.check(format!("a = {a}: |kappa(a)^2 / (a kappa(1)^2) - 1|"), (k2 / (a * base) - 1.0).abs(), Limit::Below(1e-4));
    }
    Ok(())
}

fn compact_bump(s: &Setup, radius: f64) -> Vec<f64> {
    s.grid
        .r()
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

fn plancherel(ctx: &Context, m: &mut Metrics) -> CliResult<()> {
    let s = ctx.main()?;
    let dec = s.t.require_dec()?;
    m.check("max isometry defect over 20 Gaussians", plancherel_suite_defect(ctx)?, Limit::Below(1e-3));
    let y = dec.y().re();
    m.check("|F Y| / |Y|", transform_norm(y, &s.t) / s.grid.l2(y), Limit::Below(1e-3));
    let mut worst = 0.0f64;
    for radius in [3.0, 4.0, 5.0] {
        let u = compact_bump(s, radius);
        let back = s.t.synthesize(&s.t.coefficients(&u));
        worst = worst.max(rel_l2(&s.grid, &back, &dec.p_ac_values(&u)));
    }
    m.check("max |F*F u - P_ac u| / |P_ac u|", worst, Limit::Below(1e-3));
    Ok(())
}

fn jost_bounds(ctx: &Context, m: &mut Metrics) -> CliResult<()> {
    let r = jost_refinement(ctx)?;
    let names = ["|m - 1|", "|d_r m|", "|d_rho m|", "|d_rho^2 m|"];
    for ((name, fine), change) in names.iter().zip(r.fine.ratios()).zip(r.relative_change) {
        m.check(format!("{name} ratio (fine grid)"), fine, Limit::Above(0.0));
        m.check(format!("{name} ratio change under doubling"), change, Limit::Below(0.1));
    }
    let s = ctx.main()?;
    let main = s.t.jost().expect("distorted transform keeps its table");
    let worst = main.c_plus.iter().map(|c| (c.norm() - 0.5).abs()).fold(0.0, f64::max);
    m.check("max ||c+| - 1/2|", worst, Limit::Below(1e-12));
    let (a, b) = (r.f0_coarse.constant, r.f0_fine.constant);
    m.check("two-sided |f(0,rho)| constant change under doubling", (a - b).abs() / b, Limit::Below(0.1));
    m.check("min |f(0,rho)|", r.f0_fine.min_abs_f0, Limit::Above(0.0));
    Ok(())
}

fn spread(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn kernel_decay(ctx: &Context, effort: Effort, m: &mut Metrics) -> CliResult<()> {
    let s = ctx.main()?;
    let k = &ctx.cfg.kernels;
    let ks: Vec<usize> = (s.bumps.k0..=s.bumps.k0 + k.extra_ks).collect();
    let points = certification_points(effort.kernel_samples, k.t_max, s.grid.r_max(), k.seed);
    let mut sups = Vec::new();
    for &kk in &ks {
        let sample = sample_kernel(kk, &points, &s.t, &s.bumps)?;
        sups.push(sample.bound_ratios.iter().cloned().fold(0.0, f64::max));
    }
    m.check("sampled points (with light-cone lines)", points.len() as f64, Limit::Above(effort.kernel_samples as f64 - 1.0));
    m.check("max sup |K_k| / bound", sups.iter().cloned().fold(0.0, f64::max), Limit::Above(0.0));
    m.check("k-uniformity max/min of sup ratio", spread(&sups), Limit::Below(3.0));

    // Inside the cone `r, r′ ≤ t/4` the weighted kernel `⟨t⟩³|K_k|` must stay bounded:
    // its late-time sup may not exceed the early-time one, uniformly in `k`.
    let (early, late) = ([4.0, 8.0, 16.0], [32.0, 64.0, 100.0]);
    let mut cone = Vec::new();
    let mut growth = Vec::new();
    for &kk in &ks {
        let ev = KernelEvaluator::new(kk, &s.t, &s.bumps)?;
        let sup_at = |time: f64| -> CliResult<f64> {
            let mut sup = 0.0f64;
            for a in 0..6 {
                for b in 0..6 {
                    let (r, rp) = (time / 4.0 * a as f64 / 5.0, time / 4.0 * b as f64 / 5.0);
                    sup = sup.max(ev.eval(time, r, rp)?.norm() * (1.0 + time * time).powf(1.5));
                }
            }
            Ok(sup)
        };
        let e = early.iter().map(|&t| sup_at(t)).collect::<CliResult<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        let l = late.iter().map(|&t| sup_at(t)).collect::<CliResult<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        cone.push(e.max(l));
        growth.push(l / e);
    }
    m.check("inside cone: max sup <t>^3 |K_k|", cone.iter().cloned().fold(0.0, f64::max), Limit::Above(0.0));
    m.check("inside cone: k-uniformity max/min", spread(&cone), Limit::Below(3.0));
    m.check("inside cone: max_k late/early sup <t>^3 |K_k|", growth.iter().cloned().fold(0.0, f64::max), Limit::Below(1.0));
    Ok(())
}

fn projections(ctx: &Context, m: &mut Metrics) -> CliResult<()> {
    let s = ctx.main()?;
    let dec = s.t.require_dec()?;
    let u = gaussian(&s.grid, 0.25, 2.0, 1.0);
    let mut sum = project_k(&u, 0, &s.t, &s.bumps)?;
    for k in s.bumps.ks() {
        for (a, b) in sum.iter_mut().zip(project_k(&u, k, &s.t, &s.bumps)?) {
            *a += b;
        }
    }
    let c = dec.eigen_coeff(&u);
    for (a, y) in sum.iter_mut().zip(dec.y().re()) {
        *a += c * y;
    }
    m.check("recomposition error", rel_l2(&s.grid, &sum, &u), Limit::Below(1e-3));

    let ks: Vec<usize> = (s.bumps.k0..s.bumps.k0 + 8).collect();
    let narrow = gaussian(&s.grid, 0.1, 0.0, 1.0);
    let (slope, _) = loglog_slope(&ks, &bernstein_ratios(&narrow, &ks, 2.0, f64::INFINITY, &s.t, &s.bumps)?);
    // ‖P_k f‖_∞ ≲ k^{2(1/2 − 1/q)}‖P_k f‖_2 with q = ∞ predicts exponent 1.
    m.check("Bernstein (2, inf) exponent / predicted 1", slope, Limit::Within(0.8, 1.2));

    let broad = gaussian(&s.grid, 0.15, 0.0, 1.0);
    let base = projection_lp_ratios(&broad, &ks, 2.5, &s.t, &s.bumps)?;
    let mut constants = Vec::new();
    for (i, &k) in ks.iter().enumerate() {
        let centre = 6.0;
        let packet: Vec<f64> = s
            .grid
            .r()
            .iter()
            .map(|&r| ((k as f64 + 0.5) * r).sin() * (-(r - centre).powi(2) / 2.0).exp())
            .collect();
        let own = projection_lp_ratios(&packet, &[k], 2.5, &s.t, &s.bumps)?[0];
        constants.push(own.max(base[i]));
    }
    m.check("max_k |P_k|_{L^2.5} lower estimate", constants.iter().cloned().fold(0.0, f64::max), Limit::Below(10.0));
    m.check("L^2.5 constant k-uniformity max/min", spread(&constants), Limit::Below(3.0));
    Ok(())
}

fn randomization(ctx: &Context, effort: Effort, m: &mut Metrics) -> CliResult<()> {
    let s = ctx.main()?;
    let data = rough_data(s)?;
    let dec = data.require_decomposition()?;
    let reference = orthogonality_scalar(&data.f0, &data.f1, &s.t)?;
    let mut worst = 0.0f64;
    for d in draw_batch(1000, effort.orthogonality_draws, dec.ks.len()) {
        let f = randomize(&data, &d)?;
        worst = worst.max((orthogonality_scalar(&f.f0, &f.f1, &s.t)? - reference).abs());
    }
    m.check(format!("max orthogonality defect over {} draws", effort.orthogonality_draws), worst, Limit::Below(1e-6));

    let seed = ctx.cfg.randomize.seed;
    let (a, b) = (RandomDraw::new(seed, dec.ks.len()), RandomDraw::new(seed, dec.ks.len()));
    let (fa, fb) = (randomize(&data, &a)?, randomize(&data, &b)?);
    let identical = a == b && fa.f0.iter().zip(&fb.f0).chain(fa.f1.iter().zip(&fb.f1)).all(|(x, y)| x.to_bits() == y.to_bits());
    m.check("seeded rerun bit-identical (1 = yes)", f64::from(u8::from(identical)), Limit::Within(1.0, 1.0));

    let p = ctx.cfg.randomize.params();
    let reference = hs_norm(&data.f0, &data.f1, p.s, &s.free);
    let draws = draw_batch(5000, effort.regularity_draws, dec.ks.len());
    let mut mean = 0.0;
    for d in &draws {
        let f = randomize(&data, d)?;
        mean += hs_norm(&f.f0, &f.f1, p.s, &s.free) / draws.len() as f64;
    }
    m.check(format!("mean H^s norm ratio over {} draws", draws.len()), mean / reference, Limit::Within(0.5, 2.0));
    Ok(())
}

fn tails(ctx: &Context, effort: Effort, m: &mut Metrics) -> CliResult<()> {
    let s = ctx.tails()?;
    let data = tail_data(s)?;
    let cfg = FlowConfig::z_grid(ctx.cfg.flow.t_max, ctx.cfg.flow.theta)?;
    let scale = norm_xs(&data, &ctx.cfg.randomize.params(), &s.free);
    let fit = tail_experiment(&data, scale, effort.tail_draws, ctx.cfg.tails.seed, &cfg, &s.t)?;
    m.check(format!("R^2 of log P vs lambda^2 ({} draws)", effort.tail_draws), fit.r2, Limit::Above(0.9));

    let mut one = data.clone();
    let dec = one.decomposition.as_mut().expect("decomposed");
    dec.pieces.truncate(1);
    dec.pieces[0][1].iter_mut().for_each(|x| *x = 0.0);
    let flows = piece_flows(&one, &cfg, &s.t)?;
    let draws = draw_batch(ctx.cfg.tails.seed + 1000, effort.tail_draws, 1);
    let z = random_flow_norms(&flows, &draws, &cfg.times, |u| z_norm(u, &s.grid, &cfg))?;
    let unit = z[0] / draws[0].g[0].abs();
    let fit = fit_tail(&z, unit)?;
    m.check("single mode: R^2", fit.r2, Limit::Above(0.98));
    let n = z.len() as f64;
    let worst = fit
        .lambdas
        .iter()
        .zip(&fit.empirical_tail)
        .map(|(l, p)| {
            let exact = statrs::function::erf::erfc(l / (unit * std::f64::consts::SQRT_2));
            let sigma = (exact * (1.0 - exact) / n).sqrt();
            (p - exact).abs() / (4.0 * sigma + 1e-3)
        })
        .fold(0.0, f64::max);
    m.check("single mode: max |P - erfc| / (4 sigma + 1e-3)", worst, Limit::Below(1.0));
    Ok(())
}

struct Converged {
    run: PicardRun,
    report: ValidationReport,
}

fn converge(problem: &ModulationProblem, scenario: &Scenario, cfg: &FixedPointConfig, seed: Option<u64>, theta: f64) -> CliResult<Converged> {
    let inputs = scenario.scaled(problem, cfg, seed, theta)?;
    let run = picard_solve(problem, &inputs.data, &inputs.forcing, cfg)?;
    let report = validate_solution(problem, &run.state, &inputs.forcing, cfg.eps)?;
    Ok(Converged { run, report })
}

/// `ε` values of the fixed-point ladder.
pub const EPS_LADDER: [f64; 3] = [1e-3, 3e-3, 1e-2];

fn fixed_point(ctx: &Context, effort: Effort, m: &mut Metrics) -> CliResult<()> {
    let mc = &ctx.cfg.modulation;
    let (problem, k0) = ctx.modulation()?;
    let cfg_for = |eps: f64| mc.fixed_point(eps, mc.window);
    let scenario = Scenario::new(problem, *k0, &cfg_for(mc.eps0))?;
    let mut hs = Vec::new();
    for eps in EPS_LADDER {
        let c = converge(problem, &scenario, &cfg_for(eps), Some(mc.seed), mc.forcing_theta)?;
        let max_ratio = c.run.ratios.iter().cloned().fold(0.0, f64::max);
        m.check(format!("eps = {eps:e}: max contraction ratio"), max_ratio, Limit::Below(0.9));
        m.check(format!("eps = {eps:e}: min a(t)"), c.report.a_min, Limit::Above(0.5));
        m.check(format!("eps = {eps:e}: max a(t)"), c.report.a_max, Limit::Below(1.5));
        let x = c.run.state.x_plus.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        m.check(format!("eps = {eps:e}: max |x+| / eps^2"), x / (eps * eps), Limit::Below(10.0));
        m.check(
            format!("eps = {eps:e}: |v|_L8 / interpolation bound"),
            c.report.v_l8 / c.report.interpolation_bound,
            Limit::Below(1.0),
        );
        hs.push(c.run.state.h.abs());
    }
    let ks: Vec<f64> = EPS_LADDER.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let (mx, my) = (ks.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = ks.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / ks.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    m.check("log|h| vs log eps slope", slope, Limit::Within(1.8, 2.2));

    if effort.refine_fixed_point {
        let eps = *EPS_LADDER.last().unwrap();
        let coarse_free = converge(problem, &scenario, &cfg_for(eps), None, mc.forcing_theta)?;
        let coarse_forced = converge(problem, &scenario, &cfg_for(eps), Some(mc.seed), mc.forcing_theta)?;
        let g = &mc.grid;
        let grid = make_grid(g.r_max, 2 * g.points - 1, GridScheme::Uniform)?;
        let freqs = make_frequency_grid(g.rho_min, g.rho_max, g.rho_step)?;
        let v = solwave::soliton::potential(SolitonParams::new(1.0)?, &grid);
        let t = DistortedTransform::build(&v, &grid, &freqs, JostConfig { tail_tol: ctx.cfg.jost.tail_tol, ..Default::default() })?;
        let fine = ModulationProblem::new(t, DistortedTransform::free(&grid, &freqs))?;
        let fine_cfg = FixedPointConfig { dt: 0.5 * mc.dt, ..cfg_for(eps) };
        let fine_scenario = Scenario::new(&fine, *k0, &FixedPointConfig { eps: mc.eps0, ..fine_cfg })?;
        let fine_free = converge(&fine, &fine_scenario, &fine_cfg, None, mc.forcing_theta)?;
        let fine_forced = converge(&fine, &fine_scenario, &fine_cfg, Some(mc.seed), mc.forcing_theta)?;
        m.check(
            "residual ratio under grid doubling (no forcing)",
            coarse_free.report.residual / fine_free.report.residual,
            Limit::Within(3.0, 5.0),
        );
        m.check(
            "in-band residual ratio under grid doubling (random forcing)",
            coarse_forced.report.residual_in_band / fine_forced.report.residual_in_band,
            Limit::Within(3.0, 5.0),
        );
    }
    Ok(())
}

/// Exposes the zero forcing used by callers that only need the deterministic run.
pub fn zero_forcing(problem: &ModulationProblem, cfg: &FixedPointConfig) -> SpaceTimeField {
    SpaceTimeField::zeros(cfg.times(), problem.grid.len())
}
