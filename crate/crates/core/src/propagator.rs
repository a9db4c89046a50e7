//! The linearized flow `W(t)`, a finite-difference oracle for it, the operators
//! `𝒮(t)` and `𝒞(t)` with the resonant rank-one part split off, and Monte-Carlo
//! estimates of space-time norms of randomized evolutions.

use crate::dft::DistortedTransform;
use crate::error::{Error, Result};
use crate::grid::{mixed_norm, second_derivative8, MixedOrder, NormSpec, RadialGrid, SpaceTimeField};
use crate::quad::linear_fit;
use crate::randomize::{DataPair, RandomDraw};
use crate::soliton::{potential_at, resonance, PotentialProfile, SolitonParams};
use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

/// Output times and the weight exponent of the `Z` norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowConfig {
    pub times: Vec<f64>,
    pub t_max: f64,
    pub theta: f64,
}

impl FlowConfig {
    pub fn new(times: Vec<f64>, t_max: f64, theta: f64) -> Result<Self> {
        if !(theta > 0.5) {
            return Err(Error::InvalidArgument(format!("need theta > 1/2, got {theta}")));
        }
        if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must increase from t ≥ 0".into()));
        }
        if *times.last().unwrap() > t_max * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("times exceed T = {t_max}")));
        }
        Ok(FlowConfig { times, t_max, theta })
    }

    /// `n` equally spaced times on `[0, T]`.
    pub fn uniform(t_max: f64, n: usize, theta: f64) -> Result<Self> {
        let times = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
        Self::new(times, t_max, theta)
    }

    /// The time grid used for `Z`-norm estimates, see [`z_time_grid`].
    pub fn z_grid(t_max: f64, theta: f64) -> Result<Self> {
        Self::new(z_time_grid(t_max, Z_GRID_POINTS), t_max, theta)
    }
}

pub const Z_GRID_POINTS: usize = 200;

/// Uniform on `[0, 1]` (a quarter of the points), log-spaced on `(1, T]`.
pub fn z_time_grid(t_max: f64, n: usize) -> Vec<f64> {
    if t_max <= 1.0 {
        return (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
    }
    let early = n / 4;
    let late = n - early;
    let mut times: Vec<f64> = (0..early).map(|i| i as f64 / early as f64).collect();
    let ratio = t_max.ln() / late as f64;
    times.extend((0..late).map(|i| ((i + 1) as f64 * ratio).exp()));
    *times.last_mut().unwrap() = t_max;
    times
}

/// `sin(tρ)/ρ` with its `ρ → 0` limit `t`.
pub fn sin_over(t: f64, rho: f64) -> f64 {
    let x = t * rho;
    if x.abs() < 1e-4 {
        t * (1.0 - x * x / 6.0)
    } else {
        x.sin() / rho
    }
}

/// `(1 − cos(tρ))/ρ²`, the time integral of [`sin_over`].
pub fn one_minus_cos_over(t: f64, rho: f64) -> f64 {
    let x = t * rho;
    if x.abs() < 1e-3 {
        0.5 * t * t * (1.0 - x * x / 12.0)
    } else {
        2.0 * (0.5 * x).sin().powi(2) / (rho * rho)
    }
}

struct SplitData {
    eigen: [f64; 2],
    ac: [Vec<f64>; 2],
}

fn split_data(f: &DataPair, t: &DistortedTransform) -> Result<SplitData> {
    match t.dec() {
        Some(d) => Ok(SplitData {
            eigen: [d.eigen_coeff(&f.f0), d.eigen_coeff(&f.f1)],
            ac: [d.p_ac_values(&f.f0), d.p_ac_values(&f.f1)],
        }),
        None if t.is_free() => Ok(SplitData { eigen: [0.0; 2], ac: [f.f0.clone(), f.f1.clone()] }),
        None => Err(Error::MissingDecomposition),
    }
}

pub(crate) fn remove_eigen_rows(values: &mut Array2<f64>, t: &DistortedTransform) {
    if let Some(d) = t.dec() {
        for mut row in values.rows_mut() {
            let c = d.eigen_coeff(row.as_slice().unwrap());
            row.iter_mut().zip(d.y().re()).for_each(|(u, y)| *u -= c * y);
        }
    }
}

fn add_eigen_rows(values: &mut Array2<f64>, t: &DistortedTransform, amplitude: impl Fn(f64) -> f64, times: &[f64]) {
    if let Some(d) = t.dec() {
        for (mut row, &time) in values.rows_mut().into_iter().zip(times) {
            let a = amplitude(time);
            row.iter_mut().zip(d.y().re()).for_each(|(u, y)| *u += a * y);
        }
    }
}

/// `W(t)f` and `∂_t W(t)f` on the configured times.
pub fn evolve_w_with_velocity(
    f: &DataPair,
    cfg: &FlowConfig,
    t: &DistortedTransform,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    let split = split_data(f, t)?;
    let g0 = t.coefficients(&split.ac[0]);
    let g1 = t.coefficients(&split.ac[1]);
    let rho = t.freqs().rho();
    let n_t = cfg.times.len();
    let mut pos = Array2::zeros((n_t, rho.len()));
    let mut vel = Array2::zeros((n_t, rho.len()));
    for (n, &time) in cfg.times.iter().enumerate() {
        for j in 0..rho.len() {
            let (s, c) = (time * rho[j]).sin_cos();
            pos[(n, j)] = c * g0[j] + sin_over(time, rho[j]) * g1[j];
            vel[(n, j)] = -rho[j] * s * g0[j] + c * g1[j];
        }
    }
    let mut u = t.synthesize_batch(&pos);
    let mut ut = t.synthesize_batch(&vel);
    remove_eigen_rows(&mut u, t);
    remove_eigen_rows(&mut ut, t);
    if let Some(d) = t.dec() {
        let k = d.kappa();
        let [c0, c1] = split.eigen;
        add_eigen_rows(&mut u, t, |s| c0 * (k * s).cosh() + c1 * (k * s).sinh() / k, &cfg.times);
        add_eigen_rows(&mut ut, t, |s| c0 * k * (k * s).sinh() + c1 * (k * s).cosh(), &cfg.times);
    }
    Ok((SpaceTimeField::new(cfg.times.clone(), u)?, SpaceTimeField::new(cfg.times.clone(), ut)?))
}

/// `W(t)(f₀, f₁) = cos(t√|H|)f₀ + sin(t√|H|)/√|H| f₁` on the continuous
/// spectrum, `cosh`/`sinh` of `κt` along the bound state.
pub fn evolve_w(f: &DataPair, cfg: &FlowConfig, t: &DistortedTransform) -> Result<SpaceTimeField> {
    Ok(evolve_w_with_velocity(f, cfg, t)?.0)
}

/// `‖√|H| P_ac u‖² + ‖P_ac ∂_t u‖²`, computed on the distorted side.
pub fn ac_energy(u: &[f64], ut: &[f64], t: &DistortedTransform) -> f64 {
    let project = |x: &[f64]| t.dec().map_or_else(|| x.to_vec(), |d| d.p_ac_values(x));
    let g = t.coefficients(&project(u));
    let gt = t.coefficients(&project(ut));
    let fr = t.freqs();
    fr.rho()
        .iter()
        .zip(fr.w())
        .zip(g.iter().zip(&gt))
        .map(|((rho, w), (g, gt))| w * (rho * rho * g * g + gt * gt))
        .sum()
}

/// Grid points in the absorbing layer at `R_max`.
pub const SPONGE_POINTS: usize = 5;
/// Peak damping rate of the incoming characteristic `∂_t u + ∂_r u`, in units of `1/dr`.
/// Damping `∂_t u` alone turns a layer this thin into a wall.
pub const SPONGE_STRENGTH: f64 = 100.0;

fn sponge_profile(n: usize, h: f64) -> Vec<f64> {
    let peak = SPONGE_STRENGTH / h;
    (0..n)
        .map(|i| {
            let depth = i as f64 + SPONGE_POINTS as f64 + 1.0 - n as f64;
            if depth > 0.0 {
                peak * (depth / SPONGE_POINTS as f64).powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

fn accel(u: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let mut a = second_derivative8(u, h);
    a.iter_mut().zip(u.iter().zip(v)).for_each(|(a, (u, v))| *a -= v * u);
    a
}

/// Velocity-Verlet integration of `∂_t²u = ∂_r²u − Vu` with eighth-order
/// differences, Dirichlet at the origin and a layer at `R_max` that removes
/// the incoming half of `∂_t u`.
///
/// Each gap between output times is split into equal steps no longer than `dt`.
pub fn evolve_direct_with_velocity(
    f: &DataPair,
    cfg: &FlowConfig,
    v: &PotentialProfile,
    grid: &RadialGrid,
    dt: f64,
) -> Result<(SpaceTimeField, SpaceTimeField)> {
    let h = grid.require_uniform()?;
    if !(dt > 0.0 && dt <= 0.5 * h) {
        return Err(Error::Cfl { dt, limit: 0.5 * h });
    }
    let n = grid.len();
    let pot = v.values();
    let damping: Vec<f64> = sponge_profile(n, h);
    let mut u = f.f0.clone();
    let mut ut = f.f1.clone();
    let mut a = accel(&u, pot, h);
    let n_t = cfg.times.len();
    let mut out_u = Array2::zeros((n_t, n));
    let mut out_v = Array2::zeros((n_t, n));
    let mut now = 0.0;
    for (k, &target) in cfg.times.iter().enumerate() {
        let gap = target - now;
        let steps = (gap / dt).ceil() as usize;
        if steps > 0 {
            let tau = gap / steps as f64;
            let decay: Vec<f64> = damping.iter().map(|s| (-s * tau).exp()).collect();
            for _ in 0..steps {
                for i in 0..n {
                    ut[i] += 0.5 * tau * a[i];
                    u[i] += tau * ut[i];
                }
                a = accel(&u, pot, h);
                for i in 0..n {
                    ut[i] += 0.5 * tau * a[i];
                }
                for i in (n - SPONGE_POINTS - 1)..n {
                    let ur = if i + 1 < n { (u[i + 1] - u[i - 1]) / (2.0 * h) } else { (u[i] - u[i - 1]) / h };
                    ut[i] -= 0.5 * (1.0 - decay[i]) * (ut[i] + ur);
                }
            }
        }
        now = target;
        out_u.row_mut(k).assign(&ndarray::ArrayView1::from(&u));
        out_v.row_mut(k).assign(&ndarray::ArrayView1::from(&ut));
    }
    Ok((SpaceTimeField::new(cfg.times.clone(), out_u)?, SpaceTimeField::new(cfg.times.clone(), out_v)?))
}

pub fn evolve_direct(
    f: &DataPair,
    cfg: &FlowConfig,
    v: &PotentialProfile,
    grid: &RadialGrid,
    dt: f64,
) -> Result<SpaceTimeField> {
    Ok(evolve_direct_with_velocity(f, cfg, v, grid, dt)?.0)
}

/// `½∫(∂_t u)² + u(−∂_r² + V)u` with the same difference operator as the solver.
pub fn direct_energy(u: &[f64], ut: &[f64], v: &PotentialProfile, grid: &RadialGrid) -> Result<f64> {
    let h = grid.require_uniform()?;
    let d2 = second_derivative8(u, h);
    Ok(0.5
        * grid
            .r()
            .iter()
            .enumerate()
            .map(|(i, _)| grid.w()[i] * (ut[i] * ut[i] + u[i] * (v.values()[i] * u[i] - d2[i])))
            .sum::<f64>())
}

/// The rank-one resonant piece `(4π/⟨V,φ⟩²) φ ⊗ Vφ` and the operators `𝒮(t)`, `𝒞(t)`
/// obtained by adding it back to the distorted sine and cosine flows.
#[derive(Debug, Clone)]
pub struct RepresentationOperators {
    /// `⟨V, φ⟩` over ℝ³.
    pub v_phi_pairing: f64,
    pub coefficient: f64,
    /// Half-line samples of `φ`.
    pub phi: Vec<f64>,
    /// Half-line samples of `Vφ`.
    pub v_phi: Vec<f64>,
}

impl RepresentationOperators {
    /// Only the soliton potentials carry the resonance this construction uses.
    pub fn new(v: &PotentialProfile, grid: &RadialGrid) -> Result<Self> {
        let a = v.soliton_a().ok_or(Error::NotSolitonPotential)?;
        let phi = resonance(SolitonParams::new(a)?, grid).into_re();
        let v_phi: Vec<f64> = grid.r().iter().zip(&phi).map(|(&r, p)| potential_at(a, r) * p).collect();
        let pairing = crate::soliton::profile_inner(grid, |r| potential_at(a, r), |r| crate::soliton::resonance_at(a, r));
        Ok(RepresentationOperators {
            v_phi_pairing: pairing,
            coefficient: 4.0 * std::f64::consts::PI / (pairing * pairing),
            phi,
            v_phi,
        })
    }

    /// `⟨Vφ, m(√−Δ) u⟩` for a real free symbol.
    pub fn free_pairing(&self, u: &[f64], free: &DistortedTransform, symbol: impl Fn(f64) -> f64) -> f64 {
        let gu = free.coefficients(u);
        let gv = free.coefficients(&self.v_phi);
        let fr = free.freqs();
        fr.rho().iter().zip(fr.w()).zip(gu.iter().zip(&gv)).map(|((&rho, w), (a, b))| w * symbol(rho) * a * b).sum()
    }

    /// `(𝒮(t)u, 𝒞(t)u)` at each time.
    pub fn apply_times(
        &self,
        times: &[f64],
        u: &[f64],
        t: &DistortedTransform,
        free: &DistortedTransform,
    ) -> Result<(SpaceTimeField, SpaceTimeField)> {
        let ac = t.dec().map_or_else(|| u.to_vec(), |d| d.p_ac_values(u));
        let g = t.coefficients(&ac);
        let rho = t.freqs().rho();
        let mut sin_part = Array2::zeros((times.len(), rho.len()));
        let mut cos_part = Array2::zeros((times.len(), rho.len()));
        for (n, &time) in times.iter().enumerate() {
            for j in 0..rho.len() {
                sin_part[(n, j)] = sin_over(time, rho[j]) * g[j];
                cos_part[(n, j)] = (time * rho[j]).cos() * g[j];
            }
        }
        let mut s = t.synthesize_batch(&sin_part);
        let mut c = t.synthesize_batch(&cos_part);
        remove_eigen_rows(&mut s, t);
        remove_eigen_rows(&mut c, t);

        let gu = free.coefficients(u);
        let gv = free.coefficients(&self.v_phi);
        let fr = free.freqs();
        for (n, &time) in times.iter().enumerate() {
            let (mut ps, mut pc) = (0.0, 0.0);
            for j in 0..fr.len() {
                let weight = fr.w()[j] * gu[j] * gv[j];
                ps += weight * one_minus_cos_over(time, fr.rho()[j]);
                pc += weight * sin_over(time, fr.rho()[j]);
            }
            let (ps, pc) = (self.coefficient * ps, self.coefficient * pc);
            s.row_mut(n).iter_mut().zip(&self.phi).for_each(|(x, p)| *x += ps * p);
            c.row_mut(n).iter_mut().zip(&self.phi).for_each(|(x, p)| *x += pc * p);
        }
        Ok((SpaceTimeField::new(times.to_vec(), s)?, SpaceTimeField::new(times.to_vec(), c)?))
    }

    /// `(𝒮(t)u, 𝒞(t)u)` at a single time.
    pub fn apply(&self, time: f64, u: &[f64], t: &DistortedTransform, free: &DistortedTransform) -> Result<(Vec<f64>, Vec<f64>)> {
        let (s, c) = self.apply_times(&[time], u, t, free)?;
        Ok((s.values.row(0).to_vec(), c.values.row(0).to_vec()))
    }
}

/// The six `(spatial, temporal, weighted)` components of the `Z` norm.
pub fn z_components(theta: f64) -> [(NormSpec, NormSpec, Option<f64>); 6] {
    let w = Some(1.0 + theta);
    [
        (NormSpec::Lp(6.0), NormSpec::Lp(f64::INFINITY), None),
        (NormSpec::Lp(7.2), NormSpec::Lp(f64::INFINITY), None),
        (NormSpec::Lp(7.2), NormSpec::Lp(6.0), None),
        (NormSpec::Lorentz(9.0, 2.0), NormSpec::Lp(3.0), None),
        (NormSpec::Lp(2.0), NormSpec::Lp(1.0), w),
        (NormSpec::Lp(2.0), NormSpec::Lp(2.0), w),
    ]
}

/// Sum of the `Z`-norm components, each an `L_x L_t` mixed norm over the field's times.
pub fn z_norm(field: &SpaceTimeField, grid: &RadialGrid, cfg: &FlowConfig) -> Result<f64> {
    z_components(cfg.theta)
        .into_iter()
        .map(|(x, t, w)| mixed_norm(field, grid, x, t, MixedOrder::XThenT, w))
        .sum()
}

/// `‖u‖_{L⁸_{t,x}}`.
pub fn l8_norm(field: &SpaceTimeField, grid: &RadialGrid) -> Result<f64> {
    mixed_norm(field, grid, NormSpec::Lp(8.0), NormSpec::Lp(8.0), MixedOrder::TThenX, None)
}

/// Evolutions `W(t)` of every `P_k` piece of a decomposed pair, component 0 as
/// position data and component 1 as velocity data.
pub fn piece_flows(f: &DataPair, cfg: &FlowConfig, t: &DistortedTransform) -> Result<Vec<[Array2<f64>; 2]>> {
    let dec = f.require_decomposition()?;
    let zero = vec![0.0; f.f0.len()];
    dec.pieces
        .iter()
        .map(|p| {
            let pos = evolve_w(&DataPair::new(p[0].clone(), zero.clone())?, cfg, t)?;
            let vel = evolve_w(&DataPair::new(zero.clone(), p[1].clone())?, cfg, t)?;
            Ok([pos.values, vel.values])
        })
        .collect()
}

/// `norm(W(t) f^ω_{≥k₀})` for each draw, using precomputed [`piece_flows`].
pub fn random_flow_norms<N>(flows: &[[Array2<f64>; 2]], draws: &[RandomDraw], times: &[f64], norm: N) -> Result<Vec<f64>>
where
    N: Fn(&SpaceTimeField) -> Result<f64> + Sync,
{
    if flows.is_empty() {
        return Err(Error::InvalidArgument("no frequency pieces to randomize".into()));
    }
    draws
        .par_iter()
        .map(|d| {
            if d.g.len() < flows.len() {
                return Err(Error::InvalidArgument("draw has fewer coefficients than pieces".into()));
            }
            let mut acc = Array2::zeros(flows[0][0].raw_dim());
            for (k, [pos, vel]) in flows.iter().enumerate() {
                acc.scaled_add(d.g[k], pos);
                acc.scaled_add(d.h[k], vel);
            }
            norm(&SpaceTimeField::new(times.to_vec(), acc)?)
        })
        .collect()
}

/// Empirical tail `P(‖·‖ > λ)` and its fit `log P ≈ log C − c λ²/scale²`.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub lambdas: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    pub c_fit: f64,
    pub big_c_fit: f64,
    pub r2: f64,
    pub scale: f64,
    pub n_draws: usize,
}

pub const MIN_DRAWS: usize = 200;
/// Exceedances required at the largest fitted level.
pub const MIN_EXCEEDANCES: usize = 10;
pub const TAIL_LEVELS: usize = 20;

/// Fits the upper tail between the sample median and the level still exceeded
/// by [`MIN_EXCEEDANCES`] samples.
pub fn fit_tail(samples: &[f64], scale: f64) -> Result<TailFit> {
    let n = samples.len();
    if n < MIN_DRAWS {
        return Err(Error::InsufficientDraws(format!("{n} draws, need at least {MIN_DRAWS}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[n / 2];
    let hi = sorted[n - MIN_EXCEEDANCES - 1];
    if !(hi > lo) {
        return Err(Error::InsufficientDraws("tail range collapsed to a point".into()));
    }
    let lambdas: Vec<f64> = (0..TAIL_LEVELS).map(|i| lo + (hi - lo) * i as f64 / (TAIL_LEVELS - 1) as f64).collect();
    let empirical_tail: Vec<f64> = lambdas
        .iter()
        .map(|&l| sorted.partition_point(|&x| x <= l) as f64)
        .map(|below| (n as f64 - below) / n as f64)
        .collect();
    let x: Vec<f64> = lambdas.iter().map(|l| l * l / (scale * scale)).collect();
    let y: Vec<f64> = empirical_tail.iter().map(|p| p.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    Ok(TailFit { lambdas, empirical_tail, c_fit: -slope, big_c_fit: intercept.exp(), r2, scale, n_draws: n })
}

/// Monte-Carlo tail of `‖W(t) f^ω_{≥k₀}‖_Z` over seeds `first_seed..`, scaled by `scale`
/// (typically `‖f‖_{X_s}`).
pub fn tail_experiment(
    f: &DataPair,
    scale: f64,
    n_draws: usize,
    first_seed: u64,
    cfg: &FlowConfig,
    t: &DistortedTransform,
) -> Result<TailFit> {
    if n_draws < MIN_DRAWS {
        return Err(Error::InsufficientDraws(format!("{n_draws} draws, need at least {MIN_DRAWS}")));
    }
    let flows = piece_flows(f, cfg, t)?;
    let draws = crate::randomize::draw_batch(first_seed, n_draws, flows.len());
    let grid = t.grid();
    let z = random_flow_norms(&flows, &draws, &cfg.times, |field| z_norm(field, grid, cfg))?;
    fit_tail(&z, scale)
}

/// `‖X‖_{L^p_ω} / √p` for each `p`.
pub fn moment_ratios(samples: &[f64], ps: &[f64]) -> Vec<f64> {
    let n = samples.len() as f64;
    ps.iter()
        .map(|&p| (samples.iter().map(|x| x.abs().powf(p)).sum::<f64>() / n).powf(1.0 / p) / p.sqrt())
        .collect()
}
