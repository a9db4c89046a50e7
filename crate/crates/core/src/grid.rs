//! Radial and frequency grids, grid functions and the norms evaluated on them.
//!
//! Spatial functions are stored in the half-line representation
//! `u(r) = √(4π)·r·f(r)`, so `∫ u² dr` is the L²(ℝ³) norm of the radial
//! profile `f` and the radial Laplacian becomes `u''`.

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, simpson_weights, trapezoid_weights};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `√(4π)`, the factor between a radial profile and its half-line representative.
pub const SQRT_4PI: f64 = 3.544_907_701_811_032;

/// Number of log-spaced levels used for distribution-function integrals.
pub const LORENTZ_LEVELS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScheme {
    Uniform,
    Graded,
}

/// Discretization of `(0, R_max]`.
///
/// The uniform scheme counts the origin among its `n` Simpson nodes but does
/// not store it: every half-line function vanishes there. Its weight is kept
/// in `origin_weight`, so `Σw + origin_weight = R_max`.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    r: Vec<f64>,
    w: Vec<f64>,
    r_max: f64,
    n: usize,
    scheme: GridScheme,
    refinement_level: u32,
    origin_weight: f64,
}

pub fn make_grid(r_max: f64, n: usize, scheme: GridScheme) -> Result<RadialGrid> {
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::Grid(format!("R_max must be positive, got {r_max}")));
    }
    if n < 16 {
        return Err(Error::Grid(format!("need at least 16 points, got {n}")));
    }
    let (r, w, origin_weight) = match scheme {
        GridScheme::Uniform => {
            let h = r_max / (n - 1) as f64;
            let all = simpson_weights(n, h);
            let r = (1..n).map(|i| i as f64 * h).collect();
            (r, all[1..].to_vec(), all[0])
        }
        GridScheme::Graded => {
            const PER_PANEL: usize = 8;
            let panels = ((n - 1) / PER_PANEL).max(2);
            let (x, gw) = gauss_legendre(PER_PANEL);
            let mut r = Vec::with_capacity(panels * PER_PANEL);
            let mut w = Vec::with_capacity(panels * PER_PANEL);
            for j in 0..panels {
                // quadratic edge map clusters panels near the origin
                let a = r_max * (j as f64 / panels as f64).powi(2);
                let b = r_max * ((j + 1) as f64 / panels as f64).powi(2);
                let half = 0.5 * (b - a);
                for (xi, wi) in x.iter().zip(&gw) {
                    r.push(a + half * (xi + 1.0));
                    w.push(half * wi);
                }
            }
            (r, w, 0.0)
        }
    };
    Ok(RadialGrid { r, w, r_max, n, scheme, refinement_level: 0, origin_weight })
}

impl RadialGrid {
    pub fn r(&self) -> &[f64] {
        &self.r
    }
    pub fn w(&self) -> &[f64] {
        &self.w
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn len(&self) -> usize {
        self.r.len()
    }
    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }
    pub fn refinement_level(&self) -> u32 {
        self.refinement_level
    }
    pub fn origin_weight(&self) -> f64 {
        self.origin_weight
    }
    /// Requested point count (including the implicit origin on uniform grids).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing of a uniform grid.
    pub fn spacing(&self) -> Option<f64> {
        match self.scheme {
            GridScheme::Uniform => Some(self.r_max / (self.n - 1) as f64),
            GridScheme::Graded => None,
        }
    }

    pub fn require_uniform(&self) -> Result<f64> {
        self.spacing()
            .ok_or_else(|| Error::Grid("operation needs a uniform grid".into()))
    }

    /// Halve the spacing: `n → 2n − 1`.
    pub fn refine(&self) -> RadialGrid {
        let mut g = make_grid(self.r_max, 2 * self.n - 1, self.scheme)
            .expect("refining a valid grid stays valid");
        g.refinement_level = self.refinement_level + 1;
        g
    }

    /// `∫₀^{R_max} g(r) dr`, including the origin node of uniform grids.
    pub fn integrate_fn(&self, g: impl Fn(f64) -> f64) -> f64 {
        let interior: f64 = self.r.iter().zip(&self.w).map(|(r, w)| w * g(*r)).sum();
        interior + self.origin_weight * g(0.0)
    }

    /// `∫ values dr` for samples of an integrand vanishing at the origin.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.w).map(|(v, w)| v * w).sum()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.w).map(|((a, b), w)| a * b * w).sum()
    }

    pub fn l2(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// Index of the node closest to `r`.
    pub fn nearest(&self, r: f64) -> usize {
        match self.r.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.r.len() => self.r.len() - 1,
            Err(i) => {
                if (self.r[i] - r).abs() < (r - self.r[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        }
    }
}

/// Radial frequencies `ρ_min, Δ, 2Δ, …, ρ_max` with trapezoid weights on
/// `[0, ρ_max]`; the first node stands in for ρ = 0 and carries weight Δ/2.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    rho: Vec<f64>,
    w: Vec<f64>,
    rho_min: f64,
    rho_max: f64,
    step: f64,
}

/// Default low-frequency cutoff. The stand-in error of the first node is
/// `O(ρ_min²)` relative, so this keeps free round trips at machine precision.
pub const DEFAULT_RHO_MIN: f64 = 1e-6;

pub fn make_frequency_grid(rho_min: f64, rho_max: f64, step: f64) -> Result<FrequencyGrid> {
    if !(rho_min > 0.0) || !(step > 0.0) || rho_min >= step {
        return Err(Error::Grid(format!(
            "need 0 < rho_min < step, got rho_min = {rho_min}, step = {step}"
        )));
    }
    let m = (rho_max / step).round() as usize;
    if m < 4 {
        return Err(Error::Grid(format!("rho_max = {rho_max} too small for step {step}")));
    }
    let mut rho = Vec::with_capacity(m + 1);
    rho.push(rho_min);
    rho.extend((1..=m).map(|j| j as f64 * step));
    let mut w = vec![step; m + 1];
    w[0] = 0.5 * step;
    w[m] = 0.5 * step;
    Ok(FrequencyGrid { rho, w, rho_min, rho_max: m as f64 * step, step })
}

impl FrequencyGrid {
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn w(&self) -> &[f64] {
        &self.w
    }
    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }
    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn len(&self) -> usize {
        self.rho.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
    /// Halve the step, keeping the range.
    pub fn refine(&self) -> FrequencyGrid {
        make_frequency_grid(self.rho_min, self.rho_max, 0.5 * self.step)
            .expect("refining a valid frequency grid stays valid")
    }
    /// Index range `[lo, hi]` of nodes inside `[a, b]`.
    pub fn index_range(&self, a: f64, b: f64) -> (usize, usize) {
        let lo = self.rho.partition_point(|&x| x < a);
        let hi = self.rho.partition_point(|&x| x <= b).saturating_sub(1);
        (lo, hi.max(lo))
    }
}

/// Samples of a function of ρ on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFunction {
    pub values: Vec<Complex64>,
}

/// Half-line samples `u(r_i)`; the imaginary part is absent for real functions.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    re: Vec<f64>,
    im: Option<Vec<f64>>,
}

impl RadialFunction {
    pub fn real(values: Vec<f64>) -> Self {
        RadialFunction { re: values, im: None }
    }

    pub fn complex(values: &[Complex64]) -> Self {
        RadialFunction {
            re: values.iter().map(|z| z.re).collect(),
            im: Some(values.iter().map(|z| z.im).collect()),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::real(vec![0.0; n])
    }

    /// Half-line representative of the radial profile `f`.
    pub fn from_profile(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::real(grid.r().iter().map(|&r| SQRT_4PI * r * f(r)).collect())
    }

    /// Half-line samples of `u` given directly.
    pub fn from_half_line(grid: &RadialGrid, u: impl Fn(f64) -> f64) -> Self {
        Self::real(grid.r().iter().map(|&r| u(r)).collect())
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }
    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }
    pub fn re(&self) -> &[f64] {
        &self.re
    }
    pub fn im(&self) -> Option<&[f64]> {
        self.im.as_deref()
    }
    pub fn into_re(self) -> Vec<f64> {
        self.re
    }

    pub fn values(&self) -> Vec<Complex64> {
        match &self.im {
            None => self.re.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Some(im) => self.re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        }
    }

    /// `|f(r_i)|` of the radial profile.
    pub fn abs_profile(&self, grid: &RadialGrid) -> Vec<f64> {
        let r = grid.r();
        (0..self.len())
            .map(|i| {
                let m = match &self.im {
                    None => self.re[i].abs(),
                    Some(im) => self.re[i].hypot(im[i]),
                };
                m / (SQRT_4PI * r[i])
            })
            .collect()
    }

    /// Real profile values `f(r_i)`.
    pub fn profile(&self, grid: &RadialGrid) -> Vec<f64> {
        self.re.iter().zip(grid.r()).map(|(u, r)| u / (SQRT_4PI * r)).collect()
    }

    pub fn scale(&self, c: f64) -> Self {
        RadialFunction {
            re: self.re.iter().map(|x| c * x).collect(),
            im: self.im.as_ref().map(|v| v.iter().map(|x| c * x).collect()),
        }
    }

    /// `self + c·other` for real functions.
    pub fn axpy(&self, c: f64, other: &RadialFunction) -> Self {
        let re = self.re.iter().zip(&other.re).map(|(a, b)| a + c * b).collect();
        let im = match (&self.im, &other.im) {
            (None, None) => None,
            (a, b) => {
                let n = self.len();
                let a = a.clone().unwrap_or_else(|| vec![0.0; n]);
                let b = b.clone().unwrap_or_else(|| vec![0.0; n]);
                Some(a.iter().zip(&b).map(|(x, y)| x + c * y).collect())
            }
        };
        RadialFunction { re, im }
    }

    pub fn sub(&self, other: &RadialFunction) -> Self {
        self.axpy(-1.0, other)
    }

    /// L²(ℝ³) norm, including any imaginary part.
    pub fn l2(&self, grid: &RadialGrid) -> f64 {
        let mut s = grid.inner(&self.re, &self.re);
        if let Some(im) = &self.im {
            s += grid.inner(im, im);
        }
        s.sqrt()
    }

    /// Real inner product of the real parts.
    pub fn dot(&self, other: &RadialFunction, grid: &RadialGrid) -> f64 {
        grid.inner(&self.re, &other.re)
    }
}

/// Samples `values[(n, i)]` of a half-line function at time `times[n]` and node `r_i`.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub times: Vec<f64>,
    pub values: Array2<f64>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != times.len() {
            return Err(Error::InvalidArgument(format!(
                "{} time rows for {} times",
                values.nrows(),
                times.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::InvalidArgument("times must increase from t ≥ 0".into()));
        }
        Ok(SpaceTimeField { times, values })
    }

    pub fn zeros(times: Vec<f64>, n_r: usize) -> Self {
        let n_t = times.len();
        SpaceTimeField { times, values: Array2::zeros((n_t, n_r)) }
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }
    pub fn n_r(&self) -> usize {
        self.values.ncols()
    }

    pub fn slice(&self, n: usize) -> RadialFunction {
        RadialFunction::real(self.values.row(n).to_vec())
    }
}

/// A norm on one variable: `L^p` (p may be ∞) or the Lorentz `L^{p,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormSpec {
    Lp(f64),
    Lorentz(f64, f64),
}

/// Nesting of a mixed norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedOrder {
    /// `L_x L_t`: time norm at each radius, then the spatial norm of the result.
    XThenT,
    /// `L_t L_x`: spatial norm at each time, then the time norm.
    TThenX,
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 || p == f64::INFINITY {
        Ok(())
    } else {
        Err(Error::UnsupportedNorm(format!("exponent {p} < 1")))
    }
}

/// `‖g‖_{L^p(ℝ³)}` of a radial profile sampled at the grid nodes.
pub fn lp_profile(grid: &RadialGrid, g: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    let s: f64 = g
        .iter()
        .zip(grid.r())
        .zip(grid.w())
        .map(|((g, r), w)| w * r * r * g.abs().powf(p))
        .sum();
    (4.0 * PI * s).powf(1.0 / p)
}

/// Volume `|{|g| > λ}|` in ℝ³, with `g` linear between nodes and constant on `[0, r_0]`.
pub fn distribution_function(grid: &RadialGrid, g: &[f64], lambda: f64) -> f64 {
    let r = grid.r();
    let mut vol = 0.0;
    if g[0].abs() > lambda {
        vol += r[0].powi(3);
    }
    for i in 0..r.len() - 1 {
        let (ga, gb) = (g[i].abs(), g[i + 1].abs());
        let (a, b) = (r[i], r[i + 1]);
        let above_a = ga > lambda;
        let above_b = gb > lambda;
        let (lo, hi) = match (above_a, above_b) {
            (true, true) => (a, b),
            (false, false) => continue,
            (true, false) => (a, a + (ga - lambda) / (ga - gb) * (b - a)),
            (false, true) => (b - (gb - lambda) / (gb - ga) * (b - a), b),
        };
        vol += hi.powi(3) - lo.powi(3);
    }
    4.0 * PI * vol / 3.0
}

/// Lorentz quasi-norm `(p ∫₀^∞ (λ μ(λ)^{1/p})^q dλ/λ)^{1/q}` of a sampled radial profile.
pub fn lorentz_profile(grid: &RadialGrid, g: &[f64], p: f64, q: f64) -> Result<f64> {
    if !(p > 1.0) || p.is_infinite() {
        return Err(Error::UnsupportedNorm(format!("Lorentz exponent p = {p} outside (1, ∞)")));
    }
    if !(q > 0.0) {
        return Err(Error::UnsupportedNorm(format!("Lorentz exponent q = {q} ≤ 0")));
    }
    if g.is_empty() {
        return Err(Error::InvalidArgument("empty function".into()));
    }
    let lam_max = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if lam_max == 0.0 {
        return Ok(0.0);
    }
    let min_pos = g.iter().map(|x| x.abs()).filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    let lam_lo = min_pos.max(1e-12 * lam_max);
    // just below λ_lo the level set is the full support seen at λ_lo
    let mu_lo = distribution_function(grid, g, lam_lo * (1.0 - 1e-12));
    if q.is_infinite() {
        let mut best = lam_lo * mu_lo.powf(1.0 / p);
        let span = (lam_max / lam_lo).ln();
        for k in 0..LORENTZ_LEVELS {
            let lam = lam_lo * (span * k as f64 / (LORENTZ_LEVELS - 1) as f64).exp();
            best = best.max(lam * distribution_function(grid, g, lam).powf(1.0 / p));
        }
        return Ok(best);
    }
    let lower = p / q * lam_lo.powf(q) * mu_lo.powf(q / p);
    let span = (lam_max / lam_lo).ln();
    let upper = if span > 0.0 {
        let h = span / (LORENTZ_LEVELS - 1) as f64;
        let w = simpson_weights(LORENTZ_LEVELS, h);
        let s: f64 = (0..LORENTZ_LEVELS)
            .map(|k| {
                // the top level is pinned: a rounded-down λ_max leaves a sliver that μ^{q/p} amplifies
                let lam = if k + 1 == LORENTZ_LEVELS { lam_max } else { lam_lo * (h * k as f64).exp() };
                w[k] * lam.powf(q) * distribution_function(grid, g, lam).powf(q / p)
            })
            .sum();
        p * s
    } else {
        0.0
    };
    Ok((lower + upper).powf(1.0 / q))
}

/// `‖f‖_{L^{p,q}(ℝ³)}` of a radial function.
pub fn lorentz_norm(f: &RadialFunction, grid: &RadialGrid, p: f64, q: f64) -> Result<f64> {
    lorentz_profile(grid, &f.abs_profile(grid), p, q)
}

/// `‖f‖_{L^p(ℝ³)}` by direct quadrature.
pub fn lp_norm(f: &RadialFunction, grid: &RadialGrid, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_profile(grid, &f.abs_profile(grid), p))
}

fn spatial_norm(grid: &RadialGrid, g: &[f64], spec: NormSpec) -> Result<f64> {
    match spec {
        NormSpec::Lp(p) => {
            check_exponent(p)?;
            Ok(lp_profile(grid, g, p))
        }
        NormSpec::Lorentz(p, q) => lorentz_profile(grid, g, p, q),
    }
}

fn temporal_norm(weights: &[f64], g: &[f64], spec: NormSpec) -> Result<f64> {
    match spec {
        NormSpec::Lp(p) if p.is_infinite() => Ok(g.iter().fold(0.0f64, |m, x| m.max(x.abs()))),
        NormSpec::Lp(p) => {
            check_exponent(p)?;
            let s: f64 = g.iter().zip(weights).map(|(g, w)| w * g.abs().powf(p)).sum();
            Ok(s.powf(1.0 / p))
        }
        NormSpec::Lorentz(..) => Err(Error::UnsupportedNorm("Lorentz norm in time".into())),
    }
}

/// Mixed space-time norm of a field; `weight_exponent = Some(β)` multiplies the
/// profile by `⟨r⟩^{-β}` before any norm is taken.
pub fn mixed_norm(
    field: &SpaceTimeField,
    grid: &RadialGrid,
    spatial: NormSpec,
    temporal: NormSpec,
    order: MixedOrder,
    weight_exponent: Option<f64>,
) -> Result<f64> {
    if field.n_r() != grid.len() {
        return Err(Error::InvalidArgument("field and grid sizes differ".into()));
    }
    let r = grid.r();
    let scale: Vec<f64> = r
        .iter()
        .map(|&r| {
            let wgt = weight_exponent.map_or(1.0, |b| (1.0 + r * r).powf(-0.5 * b));
            wgt / (SQRT_4PI * r)
        })
        .collect();
    let tw = if field.n_times() > 1 { trapezoid_weights(&field.times) } else { vec![1.0] };
    match order {
        MixedOrder::XThenT => {
            let mut g = vec![0.0; grid.len()];
            let mut column = vec![0.0; field.n_times()];
            for (i, gi) in g.iter_mut().enumerate() {
                for (n, c) in column.iter_mut().enumerate() {
                    *c = field.values[(n, i)].abs() * scale[i];
                }
                *gi = temporal_norm(&tw, &column, temporal)?;
            }
            spatial_norm(grid, &g, spatial)
        }
        MixedOrder::TThenX => {
            let mut per_time = Vec::with_capacity(field.n_times());
            for row in field.values.rows() {
                let g: Vec<f64> = row.iter().zip(&scale).map(|(u, s)| u.abs() * s).collect();
                per_time.push(spatial_norm(grid, &g, spatial)?);
            }
            temporal_norm(&tw, &per_time, temporal)
        }
    }
}

/// Fourth-order second derivative of half-line samples on a uniform grid,
/// using the odd extension through the origin. The last two nodes fall back
/// to second order with `u(R_max + h) = 0`.
pub fn second_derivative4(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let at = |j: isize| -> f64 {
        if j >= 0 {
            if (j as usize) < n {
                u[j as usize]
            } else {
                0.0
            }
        } else if j == -1 {
            0.0
        } else {
            -u[(-j - 2) as usize]
        }
    };
    let h2 = h * h;
    (0..n as isize)
        .map(|i| {
            if (i as usize) + 2 < n {
                (-at(i - 2) + 16.0 * at(i - 1) - 30.0 * at(i) + 16.0 * at(i + 1) - at(i + 2))
                    / (12.0 * h2)
            } else {
                (at(i - 1) - 2.0 * at(i) + at(i + 1)) / h2
            }
        })
        .collect()
}

/// Eighth-order second derivative with the same odd extension; beyond the last
/// node the samples are taken as zero.
pub fn second_derivative8(u: &[f64], h: f64) -> Vec<f64> {
    const C: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
    let n = u.len();
    let at = |j: isize| -> f64 {
        if j >= 0 {
            u.get(j as usize).copied().unwrap_or(0.0)
        } else if j == -1 {
            0.0
        } else {
            -u[(-j - 2) as usize]
        }
    };
    let h2 = h * h;
    let interior = |i: usize| -> f64 {
        C[0] * u[i]
            + C[1] * (u[i - 1] + u[i + 1])
            + C[2] * (u[i - 2] + u[i + 2])
            + C[3] * (u[i - 3] + u[i + 3])
            + C[4] * (u[i - 4] + u[i + 4])
    };
    (0..n)
        .map(|i| {
            let s = if i >= 4 && i + 4 < n {
                interior(i)
            } else {
                let c = i as isize;
                C[0] * at(c) + (1..5).map(|m| C[m] * (at(c - m as isize) + at(c + m as isize))).sum::<f64>()
            };
            s / h2
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_weights_sum_to_r_max() {
        let g = make_grid(40.0, 2001, GridScheme::Uniform).unwrap();
        let s: f64 = g.w().iter().sum::<f64>() + g.origin_weight();
        assert!((s - 40.0).abs() < 1e-10 * 40.0);
        assert_eq!(g.len(), 2000);
        assert!(g.r()[0] > 0.0);
    }

    #[test]
    fn graded_grid_clusters_near_origin() {
        let g = make_grid(40.0, 2001, GridScheme::Graded).unwrap();
        let s: f64 = g.w().iter().sum();
        assert!((s - 40.0).abs() < 1e-10 * 40.0);
        assert!(g.r()[1] - g.r()[0] < 0.01 * (g.r()[g.len() - 1] - g.r()[g.len() - 2]));
    }

    #[test]
    fn eighth_order_derivative_is_exact_on_odd_septic() {
        let g = make_grid(2.0, 201, GridScheme::Uniform).unwrap();
        let h = g.spacing().unwrap();
        let u: Vec<f64> = g.r().iter().map(|r| r.powi(7) - 3.0 * r.powi(3)).collect();
        let d = second_derivative8(&u, h);
        for i in 0..g.len() - 4 {
            let r = g.r()[i];
            assert!((d[i] - 42.0 * r.powi(5) + 18.0 * r).abs() < 1e-7, "i = {i}");
        }
    }

    #[test]
    fn second_derivative_of_odd_polynomial() {
        let g = make_grid(2.0, 201, GridScheme::Uniform).unwrap();
        let h = g.spacing().unwrap();
        let u: Vec<f64> = g.r().iter().map(|r| r.powi(5) - r).collect();
        let d = second_derivative4(&u, h);
        for i in 0..g.len() - 2 {
            let r = g.r()[i];
            assert!((d[i] - 20.0 * r.powi(3)).abs() < 1e-8, "i = {i}");
        }
    }
}
