//! Distorted Fourier transform of `H = −d²/dr² + V` on the half-line, its
//! multiplier calculus and the frequency-localizing projections.
//!
//! The generalized eigenfunctions factor as `ẽ(r, ρ) = phase(ρ)·e_R(r, ρ)` with
//! `e_R` real, so all transforms are carried out on real coefficient vectors
//! `ĝ(ρ) = c ∫ e_R(r, ρ) u(r) dr`; the phase only appears in [`forward`].

use crate::error::{Error, Result};
use crate::grid::{
    lorentz_profile, lp_profile, FrequencyFunction, FrequencyGrid, RadialFunction, RadialGrid, SQRT_4PI,
};
use crate::jost::{solve_m, JostConfig, JostTable};
use crate::quad::linear_fit;
use crate::soliton::PotentialProfile;
use crate::spectrum::SpectralDecomposition;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Serialize;

/// Transform pair for one potential.
#[derive(Debug, Clone)]
pub struct DistortedTransform {
    grid: RadialGrid,
    freqs: FrequencyGrid,
    c_norm: f64,
    jost: Option<JostTable>,
    dec: Option<SpectralDecomposition>,
    phase: Vec<Complex64>,
    /// `c·w_i·e_R(r_i, ρ_j)`: coefficients are `fwdᵀ u`.
    fwd: Array2<f64>,
    /// `c·W_j·e_R(r_i, ρ_j)`: synthesis is `inv ĝ`.
    inv: Array2<f64>,
}

/// Normalization making the discrete sine transform an isometry on a Gaussian.
pub fn calibrate_c_norm(grid: &RadialGrid, freqs: &FrequencyGrid) -> f64 {
    let u: Vec<f64> = grid.r().iter().map(|&r| r * (-0.5 * r * r).exp()).collect();
    let space = grid.inner(&u, &u);
    let freq: f64 = freqs
        .rho()
        .iter()
        .zip(freqs.w())
        .map(|(&rho, &wr)| {
            let s: f64 = grid.r().iter().zip(grid.w()).zip(&u).map(|((r, w), u)| w * (r * rho).sin() * u).sum();
            wr * s * s
        })
        .sum();
    (space / freq).sqrt()
}

fn basis_matrices(grid: &RadialGrid, freqs: &FrequencyGrid, c: f64, e: impl Fn(usize, usize) -> f64) -> (Array2<f64>, Array2<f64>) {
    let (n_r, n_rho) = (grid.len(), freqs.len());
    let mut fwd = Array2::zeros((n_r, n_rho));
    let mut inv = Array2::zeros((n_r, n_rho));
    for i in 0..n_r {
        for j in 0..n_rho {
            let b = e(i, j);
            fwd[(i, j)] = c * grid.w()[i] * b;
            inv[(i, j)] = c * freqs.w()[j] * b;
        }
    }
    (fwd, inv)
}

impl DistortedTransform {
    /// Unitary sine transform (the `V = 0` case).
    pub fn free(grid: &RadialGrid, freqs: &FrequencyGrid) -> Self {
        let c = calibrate_c_norm(grid, freqs);
        let (fwd, inv) = basis_matrices(grid, freqs, c, |i, j| (grid.r()[i] * freqs.rho()[j]).sin());
        DistortedTransform {
            grid: grid.clone(),
            freqs: freqs.clone(),
            c_norm: c,
            jost: None,
            dec: None,
            phase: vec![Complex64::new(1.0, 0.0); freqs.len()],
            fwd,
            inv,
        }
    }

    /// Transform built on a precomputed Jost table; `c` is calibrated on the free case.
    pub fn new(jost: JostTable, dec: Option<SpectralDecomposition>, grid: &RadialGrid, freqs: &FrequencyGrid) -> Result<Self> {
        if jost.rho().len() != freqs.len() || jost.r().len() != grid.len() + 1 {
            return Err(Error::InvalidArgument("Jost table does not match the grids".into()));
        }
        let c = calibrate_c_norm(grid, freqs);
        let (fwd, inv) = basis_matrices(grid, freqs, c, |i, j| jost.e_real[(i + 1, j)]);
        Ok(DistortedTransform {
            grid: grid.clone(),
            freqs: freqs.clone(),
            c_norm: c,
            phase: jost.phase.clone(),
            jost: Some(jost),
            dec,
            fwd,
            inv,
        })
    }

    /// Solve the Jost problem and the bound state (if any) for `v`, then build.
    pub fn build(v: &PotentialProfile, grid: &RadialGrid, freqs: &FrequencyGrid, cfg: JostConfig) -> Result<Self> {
        let dec = match SpectralDecomposition::build(v, grid) {
            Ok(d) => Some(d),
            Err(Error::NoNegativeEigenvalue) => None,
            Err(e) => return Err(e),
        };
        let jost = solve_m(v, grid, freqs, cfg)?;
        Self::new(jost, dec, grid, freqs)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }
    pub fn jost(&self) -> Option<&JostTable> {
        self.jost.as_ref()
    }
    pub fn dec(&self) -> Option<&SpectralDecomposition> {
        self.dec.as_ref()
    }
    pub fn require_dec(&self) -> Result<&SpectralDecomposition> {
        self.dec.as_ref().ok_or(Error::MissingDecomposition)
    }
    pub fn is_free(&self) -> bool {
        self.jost.as_ref().is_none_or(|j| j.is_free())
    }

    /// `e_R(r_i, ρ_j)`, the real part of the basis without quadrature weights.
    pub fn basis(&self, i: usize, j: usize) -> f64 {
        self.inv[(i, j)] / (self.c_norm * self.freqs.w()[j])
    }

    /// Real coefficients `ĝ_j = c Σ_i w_i e_R(r_i, ρ_j) u_i`.
    pub fn coefficients(&self, u: &[f64]) -> Vec<f64> {
        self.fwd.t().dot(&Array1::from(u.to_vec())).to_vec()
    }

    /// Row-wise coefficients of a batch `(n_batch, n_r)`.
    pub fn coefficients_batch(&self, u: &Array2<f64>) -> Array2<f64> {
        u.dot(&self.fwd)
    }

    /// `u_i = c Σ_j W_j e_R(r_i, ρ_j) ĝ_j`.
    pub fn synthesize(&self, g: &[f64]) -> Vec<f64> {
        self.inv.dot(&Array1::from(g.to_vec())).to_vec()
    }

    /// Row-wise synthesis of a batch `(n_batch, n_ρ)`.
    pub fn synthesize_batch(&self, g: &Array2<f64>) -> Array2<f64> {
        g.dot(&self.inv.t())
    }

    fn project_in(&self, u: &[f64]) -> Vec<f64> {
        match &self.dec {
            Some(d) => d.p_ac_values(u),
            None => u.to_vec(),
        }
    }

    /// `m(H) P_ac u` for a real symbol sampled on the frequency grid.
    pub fn real_multiplier(&self, u: &[f64], symbol: &[f64]) -> Vec<f64> {
        let mut g = self.coefficients(&self.project_in(u));
        for (g, m) in g.iter_mut().zip(symbol) {
            *g *= m;
        }
        self.project_in(&self.synthesize(&g))
    }

    pub fn symbol(&self, m: impl Fn(f64) -> f64) -> Vec<f64> {
        self.freqs.rho().iter().map(|&r| m(r)).collect()
    }
}

/// `(𝓕u)(ρ) = c ∫ conj(ẽ(r, ρ)) u(r) dr`.
pub fn forward(f: &RadialFunction, t: &DistortedTransform) -> FrequencyFunction {
    let re = t.coefficients(f.re());
    let im = f.im().map(|im| t.coefficients(im));
    let values = (0..re.len())
        .map(|j| {
            let z = Complex64::new(re[j], im.as_ref().map_or(0.0, |v| v[j]));
            t.phase[j].conj() * z
        })
        .collect();
    FrequencyFunction { values }
}

/// `(𝓕*g)(r) = c ∫ ẽ(r, ρ) g(ρ) dρ`.
pub fn inverse(g: &FrequencyFunction, t: &DistortedTransform) -> RadialFunction {
    let rotated: Vec<Complex64> = g.values.iter().zip(&t.phase).map(|(g, p)| p * g).collect();
    let re = t.synthesize(&rotated.iter().map(|z| z.re).collect::<Vec<_>>());
    if rotated.iter().all(|z| z.im == 0.0) {
        return RadialFunction::real(re);
    }
    let im = t.synthesize(&rotated.iter().map(|z| z.im).collect::<Vec<_>>());
    let values: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
    RadialFunction::complex(&values)
}

/// `m(H) P_ac f = 𝓕*(m·𝓕 P_ac f)`, projected again onto the continuous part.
pub fn multiplier(f: &RadialFunction, m: impl Fn(f64) -> Complex64, t: &DistortedTransform) -> RadialFunction {
    let sym: Vec<Complex64> = t.freqs.rho().iter().map(|&r| m(r)).collect();
    let apply = |u: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let g = t.coefficients(&t.project_in(u));
        let re: Vec<f64> = g.iter().zip(&sym).map(|(g, s)| g * s.re).collect();
        let im: Vec<f64> = g.iter().zip(&sym).map(|(g, s)| g * s.im).collect();
        (t.project_in(&t.synthesize(&re)), t.project_in(&t.synthesize(&im)))
    };
    let (a_re, a_im) = apply(f.re());
    let (out_re, out_im) = match f.im() {
        None => (a_re, a_im),
        Some(im) => {
            let (b_re, b_im) = apply(im);
            (
                a_re.iter().zip(&b_im).map(|(x, y)| x - y).collect(),
                a_im.iter().zip(&b_re).map(|(x, y)| x + y).collect(),
            )
        }
    };
    if out_im.iter().all(|x| *x == 0.0) {
        RadialFunction::real(out_re)
    } else {
        let v: Vec<Complex64> = out_re.iter().zip(&out_im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        RadialFunction::complex(&v)
    }
}

/// C^∞ step rising from 0 at `−w` to 1 at `w`.
pub fn smooth_step(x: f64, w: f64) -> f64 {
    let t = (x + w) / (2.0 * w);
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Telescoping bumps `ψ_k(ρ) = σ(ρ − k) − σ(ρ − k − 1)` for `k₀ ≤ k ≤ k_max`
/// together with `ψ₀(x) = 1 − σ(√x − k₀)`, so `ψ₀(ρ²) + Σ ψ_k(ρ) = 1` up to
/// `ρ = k_max + 1 − w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpFamily {
    pub width: f64,
    pub k0: usize,
    pub k_max: usize,
}

pub const DEFAULT_BUMP_WIDTH: f64 = 0.35;

impl BumpFamily {
    pub fn new(k0: usize, rho_max: f64) -> Result<Self> {
        let k_max = (rho_max - 2.0).floor();
        if k0 < 1 || (k0 as f64) > k_max {
            return Err(Error::InvalidArgument(format!("k0 = {k0} outside [1, {k_max}]")));
        }
        Ok(BumpFamily { width: DEFAULT_BUMP_WIDTH, k0, k_max: k_max as usize })
    }

    /// `ψ(x)`: equal to 1 on `[w, 1 − w]`, supported in `(−w, 1 + w)`.
    pub fn psi(&self, x: f64) -> f64 {
        smooth_step(x, self.width) - smooth_step(x - 1.0, self.width)
    }

    pub fn psi_k(&self, k: usize, rho: f64) -> f64 {
        self.psi(rho - k as f64)
    }

    /// `ψ₀(x)`, to be evaluated at `x = ρ²`.
    pub fn psi0(&self, x: f64) -> f64 {
        1.0 - smooth_step(x.max(0.0).sqrt() - self.k0 as f64, self.width)
    }

    /// Symbol of the frequencies beyond `k_max`: `σ(ρ − k_max − 1)`.
    pub fn beyond(&self, rho: f64) -> f64 {
        smooth_step(rho - (self.k_max + 1) as f64, self.width)
    }

    pub fn ks(&self) -> std::ops::RangeInclusive<usize> {
        self.k0..=self.k_max
    }

    /// Largest `|ψ₀(ρ²) + Σ ψ_k(ρ) − 1|` over grid frequencies below the truncation.
    pub fn partition_defect(&self, freqs: &FrequencyGrid) -> f64 {
        let top = (self.k_max + 1) as f64 - self.width;
        freqs
            .rho()
            .iter()
            .filter(|&&r| r <= top)
            .map(|&r| {
                let s: f64 = self.psi0(r * r) + self.ks().map(|k| self.psi_k(k, r)).sum::<f64>();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `P_k f` for `k ≥ k₀`, or `P₀ f` (symbol `ψ₀(ρ²)`) for `k = 0`.
pub fn project_k(f: &[f64], k: usize, t: &DistortedTransform, bumps: &BumpFamily) -> Result<Vec<f64>> {
    let sym = projection_symbol(k, t.freqs(), bumps)?;
    Ok(t.real_multiplier(f, &sym))
}

pub fn projection_symbol(k: usize, freqs: &FrequencyGrid, bumps: &BumpFamily) -> Result<Vec<f64>> {
    if k != 0 && k < bumps.k0 {
        return Err(Error::ProjectionIndex { k, k0: bumps.k0 });
    }
    Ok(freqs
        .rho()
        .iter()
        .map(|&r| if k == 0 { bumps.psi0(r * r) } else { bumps.psi_k(k, r) })
        .collect())
}

/// Per-frequency suprema over r of the symbol ratios `|m−1|ρ⟨r⟩³`,
/// `|∂_r m|ρ⟨r⟩⁴` and, when tabulated, `|∂_ρ m|ρ⟨r⟩³`, `|∂²_ρ m|ρ⟨r⟩²`.
fn column_ratios(table: &JostTable, j: usize) -> [f64; 4] {
    let rho = table.rho()[j];
    let mut out = [0.0f64; 4];
    for (i, &r) in table.r().iter().enumerate() {
        let jr = (1.0 + r * r).sqrt();
        out[0] = out[0].max((table.m[(i, j)] - 1.0).norm() * rho * jr.powi(3));
        out[1] = out[1].max(table.dr_m[(i, j)].norm() * rho * jr.powi(4));
        if let (Some(d1), Some(d2)) = (&table.drho_m, &table.drho2_m) {
            out[2] = out[2].max(d1[(i, j)].norm() * rho * jr.powi(3));
            out[3] = out[3].max(d2[(i, j)].norm() * rho * jr.powi(2));
        }
    }
    out
}

/// Smallest `k ≥ 2` such that every tabulated symbol ratio on `supp ψ_k` is
/// within twice its large-ρ level, taken as the largest value over the top
/// quarter of the frequency grid. Columns without ρ-derivatives are skipped.
pub fn choose_k0(table: &JostTable, width: f64) -> usize {
    let rho = table.rho();
    let n = rho.len();
    if table.is_free() {
        return 2;
    }
    let ratios: Vec<[f64; 4]> = (0..n).map(|j| column_ratios(table, j)).collect();
    let rho_top = rho[n - 1];
    let mut level = [0.0f64; 4];
    for j in (0..n).filter(|&j| rho[j] >= 0.75 * rho_top) {
        for q in 0..4 {
            if ratios[j][q].is_finite() {
                level[q] = level[q].max(ratios[j][q]);
            }
        }
    }
    let k_limit = (rho_top - 2.0).floor().max(2.0) as usize;
    for k in 2..=k_limit {
        let (lo, hi) = (k as f64 - width, k as f64 + 1.0 + width);
        let ok = (0..n)
            .filter(|&j| rho[j] >= lo && rho[j] <= hi)
            .all(|j| (0..4).all(|q| !ratios[j][q].is_finite() || ratios[j][q] <= 2.0 * level[q]));
        if ok {
            return k;
        }
    }
    k_limit
}

/// `k₀` for a potential, from a coarse table with ρ-derivatives over `[0, ρ_max]`.
pub fn k0_for(v: &PotentialProfile, grid: &RadialGrid, rho_max: f64) -> Result<usize> {
    let coarse = crate::grid::make_frequency_grid(crate::grid::DEFAULT_RHO_MIN, rho_max, 0.1)?;
    let cfg = JostConfig { rho_derivatives: true, ..Default::default() };
    let table = solve_m(v, grid, &coarse, cfg)?;
    Ok(choose_k0(&table, DEFAULT_BUMP_WIDTH))
}

/// `|∇|^s` on a half-line function through the free transform.
pub fn abs_grad_pow(u: &[f64], s: f64, free: &DistortedTransform) -> Vec<f64> {
    let sym = free.symbol(|r| r.powf(s));
    free.real_multiplier(u, &sym)
}

/// `⟨∇⟩^s` through the free transform.
pub fn japanese_grad_pow(u: &[f64], s: f64, free: &DistortedTransform) -> Vec<f64> {
    let sym = free.symbol(|r| (1.0 + r * r).powf(0.5 * s));
    free.real_multiplier(u, &sym)
}

/// `(1 − ψ₀(−Δ)) u`: removes standard low frequencies.
pub fn prefilter_high(u: &[f64], free: &DistortedTransform, bumps: &BumpFamily) -> Vec<f64> {
    let sym = free.symbol(|r| 1.0 - bumps.psi0(r * r));
    free.real_multiplier(u, &sym)
}

fn weighted_l2(grid: &RadialGrid, u: &[f64], alpha: f64) -> f64 {
    let s: f64 = grid
        .r()
        .iter()
        .zip(grid.w())
        .zip(u)
        .map(|((r, w), u)| w * u * u * (1.0 + r * r).powf(alpha))
        .sum();
    s.sqrt()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeightedProjectionReport {
    /// `(Σ_k k^{2s} ‖⟨x⟩^α P_k f‖²)^{1/2}`.
    pub square_sum: f64,
    /// `‖⟨x⟩^α |∇|^s f‖`.
    pub reference: f64,
    pub ratio: f64,
}

/// Weighted square-function comparison for high-frequency data (`f` is
/// pre-filtered with `1 − ψ₀(−Δ)` first).
pub fn check_weighted_projection(
    f: &[f64],
    alpha: f64,
    s: f64,
    t: &DistortedTransform,
    free: &DistortedTransform,
    bumps: &BumpFamily,
) -> Result<WeightedProjectionReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("weight exponent α = {alpha} outside (0, 1)")));
    }
    let hi = prefilter_high(f, free, bumps);
    let grid = t.grid();
    let mut acc = 0.0;
    for k in bumps.ks() {
        let pk = project_k(&hi, k, t, bumps)?;
        acc += (k as f64).powf(2.0 * s) * weighted_l2(grid, &pk, alpha).powi(2);
    }
    let square_sum = acc.sqrt();
    let reference = weighted_l2(grid, &abs_grad_pow(&hi, s, free), alpha);
    Ok(WeightedProjectionReport { square_sum, reference, ratio: square_sum / reference })
}

/// `‖P_k f‖_{L^q} / ‖P_k f‖_{L^p}` for each `k` (exponents may be ∞).
pub fn bernstein_ratios(f: &[f64], ks: &[usize], p: f64, q: f64, t: &DistortedTransform, bumps: &BumpFamily) -> Result<Vec<f64>> {
    let grid = t.grid();
    ks.iter()
        .map(|&k| {
            let pk = project_k(f, k, t, bumps)?;
            let prof: Vec<f64> = pk.iter().zip(grid.r()).map(|(u, r)| u / (SQRT_4PI * r)).collect();
            Ok(lp_profile(grid, &prof, q) / lp_profile(grid, &prof, p))
        })
        .collect()
}

/// Log-log slope of a ratio sequence against `k`; returns `(slope, r²)`.
pub fn loglog_slope(ks: &[usize], values: &[f64]) -> (f64, f64) {
    let x: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (slope, _, r2) = linear_fit(&x, &y);
    (slope, r2)
}

/// `‖P_k f‖_{L^p} / ‖f‖_{L^p}` for each `k`.
pub fn projection_lp_ratios(f: &[f64], ks: &[usize], p: f64, t: &DistortedTransform, bumps: &BumpFamily) -> Result<Vec<f64>> {
    let grid = t.grid();
    let prof = |u: &[f64]| -> Vec<f64> { u.iter().zip(grid.r()).map(|(u, r)| u / (SQRT_4PI * r)).collect() };
    let base = lp_profile(grid, &prof(f), p);
    ks.iter()
        .map(|&k| Ok(lp_profile(grid, &prof(&project_k(f, k, t, bumps)?), p) / base))
        .collect()
}

/// Relative Plancherel defect `|‖𝓕f‖ − ‖P_ac f‖| / ‖P_ac f‖`.
pub fn plancherel_defect(u: &[f64], t: &DistortedTransform) -> f64 {
    let pac = t.project_in(u);
    let g = t.coefficients(u);
    let fnorm: f64 = g.iter().zip(t.freqs().w()).map(|(g, w)| w * g * g).sum::<f64>().sqrt();
    let norm = t.grid().l2(&pac);
    (fnorm - norm).abs() / norm
}

/// `‖𝓕u‖_{L²(dρ)}`.
pub fn transform_norm(u: &[f64], t: &DistortedTransform) -> f64 {
    let g = t.coefficients(u);
    g.iter().zip(t.freqs().w()).map(|(g, w)| w * g * g).sum::<f64>().sqrt()
}

/// Ratio `‖(−Δ)^s f‖ / ‖|H|^s f‖` for `f = 𝓕*g`.
pub fn coercivity_ratio(g: &[f64], s: f64, t: &DistortedTransform, free: &DistortedTransform) -> f64 {
    let f = t.synthesize(g);
    let h_side: f64 = g
        .iter()
        .zip(t.freqs().rho())
        .zip(t.freqs().w())
        .map(|((g, r), w)| w * (g * r.powf(2.0 * s)).powi(2))
        .sum::<f64>()
        .sqrt();
    let fg = free.coefficients(&f);
    let free_side: f64 = fg
        .iter()
        .zip(free.freqs().rho())
        .zip(free.freqs().w())
        .map(|((g, r), w)| w * (g * r.powf(2.0 * s)).powi(2))
        .sum::<f64>()
        .sqrt();
    free_side / h_side
}

/// Lorentz norm of a half-line function's profile.
pub fn lorentz_of(u: &[f64], grid: &RadialGrid, p: f64, q: f64) -> Result<f64> {
    let prof: Vec<f64> = u.iter().zip(grid.r()).map(|(u, r)| (u / (SQRT_4PI * r)).abs()).collect();
    lorentz_profile(grid, &prof, p, q)
}

/// `(Σ_k ‖P_k u‖²)^{1/2} / ‖u‖` evaluated on the distorted side.
pub fn square_function_constant(u: &[f64], t: &DistortedTransform, bumps: &BumpFamily) -> f64 {
    let g = t.coefficients(u);
    let num: f64 = g
        .iter()
        .zip(t.freqs().rho())
        .zip(t.freqs().w())
        .map(|((g, &r), w)| w * g * g * bumps.ks().map(|k| bumps.psi_k(k, r).powi(2)).sum::<f64>())
        .sum();
    num.sqrt() / t.grid().l2(u)
}
