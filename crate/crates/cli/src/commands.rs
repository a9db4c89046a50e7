//! One function per subcommand. Each writes its artifacts into an output
//! directory and returns their file names.

use crate::acceptance::{self, CriterionOutcome};
use crate::context::{gaussian, rough_data, tail_data, Context};
use crate::emit::{write_csv, write_json, CsvRecord};
use crate::error::{CliError, CliResult};
use crate::records::{EvolveRow, JostRow, KernelRow, ModulateRow, RandomizeRow, TailRow};
use serde::{Deserialize, Serialize};
use solwave::dft::{bernstein_ratios, check_weighted_projection, coercivity_ratio, loglog_slope, plancherel_defect, WeightedProjectionReport};
use solwave::grid::{make_frequency_grid, make_grid, GridScheme};
use solwave::jost::{check_m_bounds, f0_bounds, solve_m, F0Bounds, JostConfig, JostTable, MBoundsReport};
use solwave::kernels::{certification_points, sample_kernel};
use solwave::modulation::{picard_solve, validate_solution, Scenario, ValidationReport};
use solwave::propagator::{ac_energy, evolve_w_with_velocity, tail_experiment, FlowConfig, TailFit};
use solwave::randomize::{data_norms, orthogonality_scalar, randomize, DataNorms, DataPair, MsParams, RandomDraw};
use solwave::soliton::{elliptic_residual, potential, resonance, SolitonParams};
use solwave::spectrum::{negative_count, verify_zero_resonance, ResonanceReport};
use std::path::{Path, PathBuf};

/// A fully specified run; recorded in the manifest and replayed by `reproduce`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Spectrum,
    Jost,
    DftCheck,
    KernelCheck,
    Randomize { seed: u64, batch: usize, s: f64, s1: f64, nu: f64, eps: f64 },
    Evolve,
    Tails { seed: u64, draws: usize },
    Modulate { eps: f64, seed: u64, window: f64 },
    All { quick: bool },
}

impl Job {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Randomize { seed, .. } | Job::Tails { seed, .. } | Job::Modulate { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn with_seed(mut self, new: u64) -> Self {
        if let Job::Randomize { seed, .. } | Job::Tails { seed, .. } | Job::Modulate { seed, .. } = &mut self {
            *seed = new;
        }
        self
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn csv<R: CsvRecord>(&mut self, name: &str, rows: &[R]) -> CliResult<()> {
        write_csv(&self.dir.join(name), rows)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs `job` into `dir`. Artifacts are written before an invariant failure is reported.
pub fn run(ctx: &Context, job: &Job, dir: &Path) -> CliResult<Vec<String>> {
    let mut out = Outputs::new(dir)?;
    match job {
        Job::Spectrum => spectrum(ctx, &mut out)?,
        Job::Jost => jost(ctx, &mut out)?,
        Job::DftCheck => dft_check(ctx, &mut out)?,
        Job::KernelCheck => kernel_check(ctx, &mut out)?,
        &Job::Randomize { seed, batch, s, s1, nu, eps } => {
            let params = MsParams { s, s1, nu, eps };
            params.validate().map_err(|e| CliError::Config(e.to_string()))?;
            randomize_batch(ctx, seed, batch, params, &mut out)?
        }
        Job::Evolve => evolve(ctx, &mut out)?,
        &Job::Tails { seed, draws } => tails(ctx, seed, draws, &mut out)?,
        &Job::Modulate { eps, seed, window } => modulate(ctx, eps, seed, window, &mut out)?,
        &Job::All { quick } => all(ctx, quick, &mut out)?,
    }
    Ok(out.files)
}

#[derive(Debug, Serialize)]
pub struct SpectrumResiduals {
    /// `|κ²_matrix − κ²_shooting| / κ²_matrix`.
    pub matrix_vs_shooting: f64,
    /// `‖Δφ + φ⁵‖` on the grid interior.
    pub elliptic: f64,
    /// `‖H ∂_aφ‖` on the grid interior.
    pub resonance: f64,
}

#[derive(Debug, Serialize)]
pub struct DecayFit {
    /// Fitted exponential decay rate of the bound state.
    pub rate: f64,
    /// `|rate/κ − 1|`.
    pub relative_error: f64,
}

#[derive(Debug, Serialize)]
pub struct SpectrumReport {
    pub kappa: f64,
    pub kappa_sq_matrix: f64,
    pub kappa_sq_shooting: f64,
    pub negative_count: usize,
    pub residuals: SpectrumResiduals,
    pub decay_fit: DecayFit,
    pub resonance: ResonanceReport,
}

fn spectrum(ctx: &Context, out: &mut Outputs) -> CliResult<()> {
    let s = ctx.main()?;
    let dec = s.t.require_dec()?;
    let eig = &dec.eig;
    let params = SolitonParams::new(ctx.cfg.soliton.a)?;
    let res = verify_zero_resonance(&s.v, &resonance(params, &s.grid), dec, f64::INFINITY)?;
    let report = SpectrumReport {
        kappa: eig.kappa,
        kappa_sq_matrix: eig.kappa_sq_matrix,
        kappa_sq_shooting: eig.kappa_sq_shooting,
        negative_count: negative_count(&s.v, &s.grid)?,
        residuals: SpectrumResiduals {
            matrix_vs_shooting: eig.matrix_shooting_defect(),
            elliptic: elliptic_residual(params, &s.grid)?,
            resonance: res.residual,
        },
        decay_fit: DecayFit { rate: eig.decay_rate, relative_error: (eig.decay_rate / eig.kappa - 1.0).abs() },
        resonance: res,
    };
    out.json("spectrum.json", &report)?;
    if report.negative_count != 1 {
        return Err(CliError::Invariant(format!("{} negative radial eigenvalues, expected exactly 1", report.negative_count)));
    }
    Ok(())
}

/// Symbol bounds on a coarse grid and on the grid with both steps halved.
#[derive(Debug, Serialize)]
pub struct JostRefinement {
    pub coarse: MBoundsReport,
    pub fine: MBoundsReport,
    /// `|coarse − fine| / fine` for each of the four bounds.
    pub relative_change: [f64; 4],
    pub f0_coarse: F0Bounds,
    pub f0_fine: F0Bounds,
}

pub fn jost_refinement(ctx: &Context) -> CliResult<JostRefinement> {
    let j = &ctx.cfg.jost;
    let g = &ctx.cfg.grid;
    let table = |points: usize, step: f64| -> CliResult<JostTable> {
        let grid = make_grid(g.r_max, points, GridScheme::Uniform)?;
        let freqs = make_frequency_grid(g.rho_min, j.coarse_rho_max, step)?;
        let v = potential(SolitonParams::new(ctx.cfg.soliton.a)?, &grid);
        let cfg = JostConfig { tail_tol: j.tail_tol, rho_derivatives: true, ..Default::default() };
        Ok(solve_m(&v, &grid, &freqs, cfg)?)
    };
    let coarse_table = table(j.coarse_points, j.coarse_rho_step)?;
    let fine_table = table(2 * j.coarse_points - 1, 0.5 * j.coarse_rho_step)?;
    let (coarse, fine) = (check_m_bounds(&coarse_table, j.rho_star)?, check_m_bounds(&fine_table, j.rho_star)?);
    let mut relative_change = [0.0; 4];
    for (c, (a, b)) in relative_change.iter_mut().zip(coarse.ratios().into_iter().zip(fine.ratios())) {
        *c = (a - b).abs() / b;
    }
    Ok(JostRefinement { coarse, fine, relative_change, f0_coarse: f0_bounds(&coarse_table), f0_fine: f0_bounds(&fine_table) })
}

#[derive(Debug, Serialize)]
struct JostBounds {
    refinement: JostRefinement,
    /// `max_ρ ||c₊(ρ)| − ½|` on the main grid.
    c_plus_modulus_defect: f64,
}

fn jost(ctx: &Context, out: &mut Outputs) -> CliResult<()> {
    let s = ctx.main()?;
    let table = s.t.jost().expect("distorted transform keeps its table");
    let rows: Vec<JostRow> = table
        .rho()
        .iter()
        .enumerate()
        .map(|(j, &rho)| {
            let m_bound_ratio = table
                .r()
                .iter()
                .enumerate()
                .map(|(i, &r)| (table.m[(i, j)] - 1.0).norm() * rho * (1.0 + r * r).powf(1.5))
                .fold(0.0, f64::max);
            let c = table.c_plus[j];
            JostRow { rho, re_c_plus: c.re, im_c_plus: c.im, abs_f0: table.f0[j].norm(), m_bound_ratio }
        })
        .collect();
    out.csv("jost.csv", &rows)?;
    let c_plus_modulus_defect = table.c_plus.iter().map(|c| (c.norm() - 0.5).abs()).fold(0.0, f64::max);
    out.json("jost_bounds.json", &JostBounds { refinement: jost_refinement(ctx)?, c_plus_modulus_defect })
}

#[derive(Debug, Serialize)]
struct Bernstein {
    p: f64,
    /// `None` stands for `q = ∞`.
    q: Option<f64>,
    ks: Vec<usize>,
    ratios: Vec<f64>,
    predicted_exponent: f64,
    fitted_exponent: f64,
    r2: f64,
}

#[derive(Debug, Serialize)]
struct Coercivity {
    s: f64,
    ratio: f64,
}

#[derive(Debug, Serialize)]
struct DftCheck {
    k0: usize,
    /// Largest isometry defect over Gaussians of widths 0.3 to 2 and centres 0 to 6.
    plancherel_defect: f64,
    bernstein_exponents: Vec<Bernstein>,
    coercivity_ratios: Vec<Coercivity>,
    weighted_square_function: WeightedProjectionReport,
}

/// Widths and centres of the Gaussian suite used for the isometry check.
pub const PLANCHEREL_WIDTHS: [f64; 5] = [0.3, 0.6, 1.0, 1.5, 2.0];
pub const PLANCHEREL_CENTRES: [f64; 4] = [0.0, 2.0, 4.0, 6.0];

pub fn plancherel_suite_defect(ctx: &Context) -> CliResult<f64> {
    let s = ctx.main()?;
    let mut worst = 0.0f64;
    for width in PLANCHEREL_WIDTHS {
        for centre in PLANCHEREL_CENTRES {
            worst = worst.max(plancherel_defect(&gaussian(&s.grid, width, centre, 1.0), &s.t));
        }
    }
    Ok(worst)
}

fn dft_check(ctx: &Context, out: &mut Outputs) -> CliResult<()> {
    let s = ctx.main()?;
    let ks: Vec<usize> = (s.bumps.k0..s.bumps.k0 + 8).collect();
    let ratios = bernstein_ratios(&gaussian(&s.grid, 0.1, 0.0, 1.0), &ks, 2.0, f64::INFINITY, &s.t, &s.bumps)?;
    let (fitted_exponent, r2) = loglog_slope(&ks, &ratios);
    let g = s.t.coefficients(&gaussian(&s.grid, 1.0, 3.0, 1.0));
    let coercivity_ratios = [0.25, 0.5].into_iter().map(|e| Coercivity { s: e, ratio: coercivity_ratio(&g, e, &s.t, &s.free) }).collect();
    let d = &ctx.cfg.dft;
    let report = DftCheck {
        k0: s.bumps.k0,
        plancherel_defect: plancherel_suite_defect(ctx)?,
        bernstein_exponents: vec![Bernstein { p: 2.0, q: None, ks, ratios, predicted_exponent: 1.0, fitted_exponent, r2 }],
        coercivity_ratios,
        weighted_square_function: check_weighted_projection(
            &gaussian(&s.grid, 0.2, 1.0, 1.0),
            d.square_sigma,
            d.square_delta,
            &s.t,
            &s.free,
            &s.bumps,
        )?,
    };
    out.json("dft_check.json", &report)
}

#[derive(Debug, Serialize)]
struct KernelSummary {
    ks: Vec<usize>,
    samples: usize,
    t_max: f64,
    seed: u64,
    sup_ratio: Vec<f64>,
    spread: f64,
}

fn kernel_check(ctx: &Context, out: &mut Outputs) -> CliResult<()> {
    let s = ctx.main()?;
    let k = &ctx.cfg.kernels;
    let ks: Vec<usize> = (s.bumps.k0..=s.bumps.k0 + k.extra_ks).collect();
    let points = certification_points(k.samples, k.t_max, s.grid.r_max(), k.seed);
    let mut rows = Vec::new();
    let mut sup_ratio = Vec::new();
    for &kk in &ks {
        let sample = sample_kernel(kk, &points, &s.t, &s.bumps)?;
        sup_ratio.push(sample.bound_ratios.iter().cloned().fold(0.0, f64::max));
        for ((&(t, r, rp), z), &bound_ratio) in sample.points.iter().zip(&sample.values).zip(&sample.bound_ratios) {
            rows.push(KernelRow { k: kk, t, r, rp, abs_k: z.norm(), bound_ratio });
        }
    }
    let spread = sup_ratio.iter().cloned().fold(0.0, f64::max) / sup_ratio.iter().cloned().fold(f64::INFINITY, f64::min);
    out.csv("kernel_check.csv", &rows)?;
    out.json("kernel_check.json", &KernelSummary { ks, samples: points.len(), t_max: k.t_max, seed: k.seed, sup_ratio, spread })?;
    if !(spread < 3.0) {
        return Err(CliError::Invariant(format!("kernel bound ratio spread {spread:.3} over k is not below 3")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RandomizeSummary {
    params: MsParams,
    first_seed: u64,
    batch: usize,
    deterministic: DataNorms,
    mean_hs_ratio: f64,
    mean_xs_ratio: f64,
    max_abs_orthogonality_defect: f64,
}

fn randomize_batch(ctx: &Context, seed: u64, batch: usize, params: MsParams, out: &mut Outputs) -> CliResult<()> {
    let s = ctx.main()?;
    let data = rough_data(s)?;
    let modes = data.require_decomposition()?.ks.len();
    let reference = orthogonality_scalar(&data.f0, &data.f1, &s.t)?;
    let deterministic = data_norms(&data, &params, &s.free)?;
    let rows = (0..batch as u64)
        .map(|i| {
            let f = randomize(&data, &RandomDraw::new(seed + i, modes))?;
            let n = data_norms(&f, &params, &s.free)?;
            Ok(RandomizeRow {
                seed: seed + i,
                hs_norm: n.hs,
                xs_norm: n.xs,
                xs_tilde_norm: n.xs_tilde,
                orthogonality_defect: orthogonality_scalar(&f.f0, &f.f1, &s.t)? - reference,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mean = |v: fn(&RandomizeRow) -> f64| rows.iter().map(v).sum::<f64>() / rows.len() as f64;
    let summary = RandomizeSummary {
        params,
        first_seed: seed,
        batch,
        deterministic,
        mean_hs_ratio: mean(|r| r.hs_norm) / deterministic.hs,
        mean_xs_ratio: mean(|r| r.xs_norm) / deterministic.xs,
        max_abs_orthogonality_defect: rows.iter().map(|r| r.orthogonality_defect.abs()).fold(0.0, f64::max),
    };
    out.csv("randomize.csv", &rows)?;
    out.json("randomize.json", &summary)
}

/// Largest relative drift of the continuous-spectrum energy `evolve` accepts.
pub const ENERGY_DRIFT_TOL: f64 = 1e-6;

fn evolve(ctx: &Context, out: &mut Outputs) -> CliResult<()> {
    let s = ctx.main()?;
    let dec = s.t.require_dec()?;
    let f = DataPair::new(
        dec.p_ac_values(&gaussian(&s.grid, 0.4, 1.5, 1.0)),
        dec.p_ac_values(&gaussian(&s.grid, 0.6, 0.5, 0.4)),
    )?;
    let flow = &ctx.cfg.flow;
    let cfg = FlowConfig::new(flow.times.clone(), flow.t_max, flow.theta)?;
    let (u, ut) = evolve_w_with_velocity(&f, &cfg, &s.t)?;
    let rows: Vec<EvolveRow> = cfg
        .times
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            let (pos, vel) = (u.slice(n).into_re(), ut.slice(n).into_re());
            let linf = u.slice(n).profile(&s.grid).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            EvolveRow { t, l2: s.grid.l2(&pos), linf, ac_energy: ac_energy(&pos, &vel, &s.t) }
        })
        .collect();
    out.csv("evolve.csv", &rows)?;
    let e0 = rows[0].ac_energy;
    let drift = rows.iter().map(|r| (r.ac_energy - e0).abs() / e0).fold(0.0, f64::max);
    if !(drift < ENERGY_DRIFT_TOL) {
        return Err(CliError::Invariant(format!("continuous-spectrum energy drifted by {drift:e}")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TailsReport {
    theta: f64,
    t_max: f64,
    first_seed: u64,
    fit: TailFit,
}

fn tails(ctx: &Context, seed: u64, draws: usize, out: &mut Outputs) -> CliResult<()> {
    let s = ctx.tails()?;
    let data = tail_data(s)?;
    let cfg = FlowConfig::z_grid(ctx.cfg.flow.t_max, ctx.cfg.flow.theta)?;
    let scale = solwave::randomize::norm_xs(&data, &ctx.cfg.randomize.params(), &s.free);
    let fit = tail_experiment(&data, scale, draws, seed, &cfg, &s.t)?;
    let rows: Vec<TailRow> = fit
        .lambdas
        .iter()
        .zip(&fit.empirical_tail)
        .map(|(&lambda, &empirical_tail)| TailRow {
            lambda,
            empirical_tail,
            fitted_tail: fit.big_c_fit * (-fit.c_fit * lambda * lambda / (fit.scale * fit.scale)).exp(),
        })
        .collect();
    out.csv("tails.csv", &rows)?;
    out.json("tails.json", &TailsReport { theta: cfg.theta, t_max: cfg.t_max, first_seed: seed, fit })
}

#[derive(Debug, Serialize)]
struct ModulateReport {
    eps: f64,
    window: f64,
    seed: u64,
    forcing_z_norm: f64,
    passes: usize,
    distances: Vec<f64>,
    ratios: Vec<f64>,
    h: f64,
    h_tail: f64,
    cancellation_defect: f64,
    validation: ValidationReport,
}

fn modulate(ctx: &Context, eps: f64, seed: u64, window: f64, out: &mut Outputs) -> CliResult<()> {
    let mc = &ctx.cfg.modulation;
    let cfg = mc.fixed_point(eps, window);
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let (problem, k0) = ctx.modulation()?;
    let scenario = Scenario::new(problem, *k0, &cfg)?;
    let inputs = scenario.scaled(problem, &cfg, Some(seed), mc.forcing_theta)?;
    let run = picard_solve(problem, &inputs.data, &inputs.forcing, &cfg)?;
    let validation = validate_solution(problem, &run.state, &inputs.forcing, eps)?;
    let st = &run.state;
    let rows: Vec<ModulateRow> = st
        .times
        .iter()
        .enumerate()
        .map(|(n, &t)| ModulateRow {
            t,
            a: st.a[n],
            a_dot: st.a_dot[n],
            x_plus: st.x_plus[n],
            x_minus: st.x_minus[n],
            v_l2: problem.grid.l2(&st.v.slice(n).into_re()),
        })
        .collect();
    out.csv("modulate.csv", &rows)?;
    out.json(
        "modulate.json",
        &ModulateReport {
            eps,
            window,
            seed,
            forcing_z_norm: inputs.forcing_z,
            passes: run.passes,
            distances: run.distances.clone(),
            ratios: run.ratios.clone(),
            h: st.h,
            h_tail: run.h_tail,
            cancellation_defect: run.cancellation_defect,
            validation,
        },
    )
}

#[derive(Debug, Serialize)]
struct AcceptanceReport {
    quick: bool,
    pass: bool,
    criteria: Vec<CriterionOutcome>,
}

fn all(ctx: &Context, quick: bool, out: &mut Outputs) -> CliResult<()> {
    let outcomes = acceptance::run_all(ctx, quick, |o| println!("{}", o.line()));
    let rows: Vec<_> = outcomes.iter().flat_map(|o| o.rows()).collect();
    out.csv("acceptance.csv", &rows)?;
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    out.json("acceptance.json", &AcceptanceReport { quick, pass: failed.is_empty(), criteria: outcomes })?;
    if !failed.is_empty() {
        return Err(CliError::Invariant(format!("acceptance criteria {failed:?} failed")));
    }
    Ok(())
}
