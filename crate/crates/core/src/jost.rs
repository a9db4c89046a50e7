//! Jost solutions `f(r, ρ) ~ e^{irρ}` of `−f'' + V f = ρ² f`, their slowly
//! varying part `m = e^{−irρ} f`, the coefficient `c₊` and the regular
//! eigenfunctions `ẽ = c₊ f − f̄/(2i)`.
//!
//! Each ρ-column is integrated inward from `R_max`. For `ρ ≥ 1/2` the solution
//! is written as `f = α e^{irρ} + β e^{−irρ}` so that only the slowly varying
//! amplitudes are stepped; below that the equation for `m` is stepped directly.

use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, RadialGrid};
use crate::quad::{filon_linear, gauss_legendre};
use crate::soliton::PotentialProfile;
use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Threshold between the direct `m` equation and the amplitude form.
const AMPLITUDE_FORM_RHO: f64 = 0.5;
/// Target phase advance per RK4 substep.
const PHASE_PER_STEP: f64 = 0.1;
/// Step in ρ for the finite-difference ρ-derivatives.
pub const RHO_FD_STEP: f64 = 5e-3;

#[derive(Debug, Clone, Copy)]
pub struct JostConfig {
    /// Largest accepted size of the analytic tail correction `|m(R_max) − 1|`.
    pub tail_tol: f64,
    /// Whether to build `∂_ρ m` and `∂²_ρ m`.
    pub rho_derivatives: bool,
    /// Columns with `ρ` below this get no ρ-derivatives.
    pub rho_derivative_min: f64,
}

impl Default for JostConfig {
    fn default() -> Self {
        JostConfig { tail_tol: 1e-2, rho_derivatives: false, rho_derivative_min: 0.25 }
    }
}

/// Columns of `m`, `∂_r m` and derived scattering data over a frequency grid.
///
/// Row 0 of every r-indexed table is the origin; rows `1..` follow the grid.
#[derive(Debug, Clone)]
pub struct JostTable {
    r: Vec<f64>,
    rho: Vec<f64>,
    pub m: Array2<Complex64>,
    pub dr_m: Array2<Complex64>,
    pub drho_m: Option<Array2<Complex64>>,
    pub drho2_m: Option<Array2<Complex64>>,
    /// `f(0, ρ) = m(0, ρ)`.
    pub f0: Vec<Complex64>,
    pub c_plus: Vec<Complex64>,
    /// `|m(R_max) − 1|` contributed by the analytic tail.
    pub tail: Vec<f64>,
    /// Real eigenfunction `Im(f̄(0)·f)/|f(0)|`; `ẽ = phase · e_real`.
    pub e_real: Array2<f64>,
    /// `f̄(0)/|f(0)|`.
    pub phase: Vec<Complex64>,
    zero_potential: bool,
}

/// `∫_R^∞ e^{2iρ(s−R)} s^{-4} ds`, by rotating the contour onto `s = R + iy`.
pub fn quartic_tail_integral(rho: f64, r_max: f64) -> Complex64 {
    // y = R·x/(1−x) maps [0, 1) onto [0, ∞); panels cluster where e^{−2ρy} varies
    let edges = [0.0, 1e-4, 1e-3, 1e-2, 0.05, 0.15, 0.35, 0.6, 0.85, 1.0];
    let (xs, ws) = gauss_legendre(16);
    let mut acc = Complex64::new(0.0, 0.0);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        for (x, w) in xs.iter().zip(&ws) {
            let s = a + half * (x + 1.0);
            let y = r_max * s / (1.0 - s);
            let dy = r_max / ((1.0 - s) * (1.0 - s));
            let z = Complex64::new(r_max, y);
            acc += half * w * dy * (-2.0 * rho * y).exp() * I / (z * z * z * z);
        }
    }
    acc
}

/// `(m(R), ∂_r m(R))` from the first Born term of the `c₄/r⁴` tail.
fn tail_start(c4: f64, rho: f64, r_max: f64) -> (Complex64, Complex64) {
    if c4 == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let tail = quartic_tail_integral(rho, r_max);
    let dm = (c4 * tail - c4 / (3.0 * r_max.powi(3))) / (2.0 * I * rho);
    (1.0 + dm, -c4 * tail)
}

fn substeps(rho: f64, v_scale: f64, len: f64) -> usize {
    ((2.0 * rho).max(v_scale) * len / PHASE_PER_STEP).ceil().max(1.0) as usize
}

/// One column `(m, ∂_r m)` on `nodes` (origin first), with fixed substep counts.
fn solve_column(
    v: &PotentialProfile,
    nodes: &[f64],
    rho: f64,
    steps: &[usize],
) -> (Vec<Complex64>, Vec<Complex64>, f64) {
    let n = nodes.len();
    let r_max = nodes[n - 1];
    let (m_end, dm_end) = tail_start(v.quartic_tail(), rho, r_max);
    let mut m = vec![Complex64::new(0.0, 0.0); n];
    let mut dm = m.clone();
    m[n - 1] = m_end;
    dm[n - 1] = dm_end;
    let tail = (m_end - 1.0).norm();

    if rho >= AMPLITUDE_FORM_RHO {
        let two_i_rho = 2.0 * I * rho;
        let rot = |r: f64| Complex64::from_polar(1.0, 2.0 * rho * r);
        // α = m + m'/(2iρ), β = −e^{2irρ} m'/(2iρ)
        let mut alpha = m_end + dm_end / two_i_rho;
        let mut beta = -rot(r_max) * dm_end / two_i_rho;
        let rhs = |r: f64, a: Complex64, b: Complex64| -> (Complex64, Complex64) {
            let k = v.eval(r) / two_i_rho;
            let e = rot(r);
            (k * (a + b * e.conj()), -k * (a * e + b))
        };
        for i in (0..n - 1).rev() {
            let s = steps[i];
            let h = (nodes[i] - nodes[i + 1]) / s as f64;
            let mut r = nodes[i + 1];
            for _ in 0..s {
                let (k1a, k1b) = rhs(r, alpha, beta);
                let (k2a, k2b) = rhs(r + 0.5 * h, alpha + 0.5 * h * k1a, beta + 0.5 * h * k1b);
                let (k3a, k3b) = rhs(r + 0.5 * h, alpha + 0.5 * h * k2a, beta + 0.5 * h * k2b);
                let (k4a, k4b) = rhs(r + h, alpha + h * k3a, beta + h * k3b);
                alpha += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
                beta += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
                r += h;
            }
            let back = rot(nodes[i]).conj();
            m[i] = alpha + beta * back;
            dm[i] = -two_i_rho * beta * back;
        }
    } else {
        // m'' = V m − 2iρ m'
        let rhs = |r: f64, y: Complex64, dy: Complex64| (dy, v.eval(r) * y - 2.0 * I * rho * dy);
        let (mut y, mut dy) = (m_end, dm_end);
        for i in (0..n - 1).rev() {
            let s = steps[i];
            let h = (nodes[i] - nodes[i + 1]) / s as f64;
            let mut r = nodes[i + 1];
            for _ in 0..s {
                let (k1a, k1b) = rhs(r, y, dy);
                let (k2a, k2b) = rhs(r + 0.5 * h, y + 0.5 * h * k1a, dy + 0.5 * h * k1b);
                let (k3a, k3b) = rhs(r + 0.5 * h, y + 0.5 * h * k2a, dy + 0.5 * h * k2b);
                let (k4a, k4b) = rhs(r + h, y + h * k3a, dy + h * k3b);
                y += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
                dy += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
                r += h;
            }
            m[i] = y;
            dm[i] = dy;
        }
    }
    (m, dm, tail)
}

fn nodes_with_origin(grid: &RadialGrid) -> Vec<f64> {
    let mut nodes = Vec::with_capacity(grid.len() + 1);
    nodes.push(0.0);
    nodes.extend_from_slice(grid.r());
    nodes
}

fn column_steps(v: &PotentialProfile, nodes: &[f64], rho: f64) -> Vec<usize> {
    let v_scale = v.values().iter().fold(0.0f64, |m, x| m.max(x.abs())).sqrt();
    nodes.windows(2).map(|w| substeps(rho, v_scale, w[1] - w[0])).collect()
}

/// Build the Jost table for every frequency of `freqs`.
pub fn solve_m(
    v: &PotentialProfile,
    grid: &RadialGrid,
    freqs: &FrequencyGrid,
    cfg: JostConfig,
) -> Result<JostTable> {
    let nodes = nodes_with_origin(grid);
    let n_r = nodes.len();
    let n_rho = freqs.len();
    let zero = v.is_zero();

    let columns: Vec<(Vec<Complex64>, Vec<Complex64>, f64, Option<[Vec<Complex64>; 2]>)> = freqs
        .rho()
        .par_iter()
        .map(|&rho| {
            if zero {
                let one = vec![Complex64::new(1.0, 0.0); n_r];
                let nil = vec![Complex64::new(0.0, 0.0); n_r];
                let derivs = cfg.rho_derivatives.then(|| [nil.clone(), nil.clone()]);
                return (one, nil, 0.0, derivs);
            }
            let steps = column_steps(v, &nodes, rho);
            let (m, dm, tail) = solve_column(v, &nodes, rho, &steps);
            let derivs = (cfg.rho_derivatives && rho >= cfg.rho_derivative_min.max(3.0 * RHO_FD_STEP))
                .then(|| rho_derivatives(v, &nodes, rho, &steps, &m));
            (m, dm, tail, derivs)
        })
        .collect();

    let mut m = Array2::zeros((n_r, n_rho));
    let mut dr_m = Array2::zeros((n_r, n_rho));
    let mut tail = vec![0.0; n_rho];
    let (mut d1, mut d2) = if cfg.rho_derivatives {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        (Some(Array2::from_elem((n_r, n_rho), nan)), Some(Array2::from_elem((n_r, n_rho), nan)))
    } else {
        (None, None)
    };
    for (j, (mc, dc, t, derivs)) in columns.into_iter().enumerate() {
        m.column_mut(j).assign(&ndarray::Array1::from(mc));
        dr_m.column_mut(j).assign(&ndarray::Array1::from(dc));
        tail[j] = t;
        if let (Some([a, b]), Some(d1), Some(d2)) = (derivs, d1.as_mut(), d2.as_mut()) {
            d1.column_mut(j).assign(&ndarray::Array1::from(a));
            d2.column_mut(j).assign(&ndarray::Array1::from(b));
        }
    }
    if let Some(worst) = tail.iter().cloned().fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t)))) {
        if worst > cfg.tail_tol {
            return Err(Error::TailTooLarge { size: worst, r_max: grid.r_max(), tol: cfg.tail_tol });
        }
    }
    Ok(assemble(nodes, freqs.rho().to_vec(), m, dr_m, d1, d2, tail, zero))
}

/// Fourth-order central differences in ρ with the base column's substep counts.
fn rho_derivatives(
    v: &PotentialProfile,
    nodes: &[f64],
    rho: f64,
    steps: &[usize],
    m0: &[Complex64],
) -> [Vec<Complex64>; 2] {
    let d = RHO_FD_STEP;
    let at = |k: f64| solve_column(v, nodes, rho + k * d, steps).0;
    let (p1, p2, m1, m2) = (at(1.0), at(2.0), at(-1.0), at(-2.0));
    let n = nodes.len();
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for i in 0..n {
        first.push((m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * d));
        second.push((-m2[i] + 16.0 * m1[i] - 30.0 * m0[i] + 16.0 * p1[i] - p2[i]) / (12.0 * d * d));
    }
    [first, second]
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    r: Vec<f64>,
    rho: Vec<f64>,
    m: Array2<Complex64>,
    dr_m: Array2<Complex64>,
    drho_m: Option<Array2<Complex64>>,
    drho2_m: Option<Array2<Complex64>>,
    tail: Vec<f64>,
    zero_potential: bool,
) -> JostTable {
    let f0: Vec<Complex64> = m.row(0).to_vec();
    let c_plus: Vec<Complex64> = f0.iter().map(|f| f.conj() / f / (2.0 * I)).collect();
    let phase: Vec<Complex64> = f0.iter().map(|f| f.conj() / f.norm()).collect();
    let mut e_real = Array2::zeros((r.len(), rho.len()));
    for (i, &ri) in r.iter().enumerate() {
        for (j, &rj) in rho.iter().enumerate() {
            if zero_potential {
                e_real[(i, j)] = (ri * rj).sin();
                continue;
            }
            let f = Complex64::from_polar(1.0, ri * rj) * m[(i, j)];
            e_real[(i, j)] = (f0[j].conj() * f).im / f0[j].norm();
        }
    }
    JostTable { r, rho, m, dr_m, drho_m, drho2_m, f0, c_plus, tail, e_real, phase, zero_potential }
}

impl JostTable {
    /// Radii of the table rows (origin first).
    pub fn r(&self) -> &[f64] {
        &self.r
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn is_free(&self) -> bool {
        self.zero_potential
    }

    /// `f(r_i, ρ_j)`.
    pub fn f(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.r[i] * self.rho[j]) * self.m[(i, j)]
    }

    /// `∂_r f(r_i, ρ_j)`.
    pub fn dr_f(&self, i: usize, j: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.r[i] * self.rho[j]) * (self.dr_m[(i, j)] + I * self.rho[j] * self.m[(i, j)])
    }

    /// Slowly varying amplitudes `(α, β)` with `m = α + β e^{−2irρ}`.
    pub fn amplitudes(&self, i: usize, j: usize) -> (Complex64, Complex64) {
        let two_i_rho = 2.0 * I * self.rho[j];
        let dm = self.dr_m[(i, j)];
        let alpha = self.m[(i, j)] + dm / two_i_rho;
        let beta = -Complex64::from_polar(1.0, 2.0 * self.r[i] * self.rho[j]) * dm / two_i_rho;
        (alpha, beta)
    }

    /// `∂_r ẽ(r_i, ρ_j)` up to the phase factor.
    pub fn dr_e_real(&self, i: usize, j: usize) -> f64 {
        if self.zero_potential {
            return self.rho[j] * (self.r[i] * self.rho[j]).cos();
        }
        (self.f0[j].conj() * self.dr_f(i, j)).im / self.f0[j].norm()
    }

    /// `|ẽ(0, ρ)|` over the table, computed from `c₊ f(0) − f̄(0)/(2i)`.
    pub fn dirichlet_defect(&self) -> f64 {
        self.f0
            .iter()
            .zip(&self.c_plus)
            .map(|(f, c)| (c * f - f.conj() / (2.0 * I)).norm())
            .fold(0.0, f64::max)
    }
}

pub fn c_plus(table: &JostTable) -> &[Complex64] {
    &table.c_plus
}

/// `ẽ(r_i, ρ_j)` on the grid nodes (origin row excluded).
pub fn e_tilde(table: &JostTable) -> Result<Array2<Complex64>> {
    let defect = table.dirichlet_defect();
    if defect > 1e-6 {
        return Err(Error::Dirichlet(defect));
    }
    let mut out = Array2::zeros((table.r.len() - 1, table.rho.len()));
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = table.phase[j] * table.e_real[(i + 1, j)];
    }
    Ok(out)
}

/// `exp(∫ r|V| dr)`, the a-priori ceiling on `|m|`.
pub fn gronwall_ceiling(v: &PotentialProfile, grid: &RadialGrid) -> f64 {
    let s: f64 = grid.r().iter().zip(v.values()).zip(grid.w()).map(|((r, v), w)| w * r * v.abs()).sum();
    s.exp()
}

/// Two-sided constant for `ρ/(1+ρ)/C ≤ |f(0,ρ)| ≤ C`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct F0Bounds {
    pub upper: f64,
    pub lower: f64,
    pub constant: f64,
    /// Smallest `|f(0, ρ)|` on the grid.
    pub min_abs_f0: f64,
}

pub fn f0_bounds(table: &JostTable) -> F0Bounds {
    let mut upper = 0.0f64;
    let mut lower = 0.0f64;
    let mut min_abs = f64::INFINITY;
    for (f, &rho) in table.f0.iter().zip(&table.rho) {
        let a = f.norm();
        upper = upper.max(a);
        lower = lower.max(rho / (1.0 + rho) / a);
        min_abs = min_abs.min(a);
    }
    F0Bounds { upper, lower, constant: upper.max(lower), min_abs_f0: min_abs }
}

/// Normalized suprema of the four symbol bounds over `ρ ≥ ρ*`:
/// `|m−1|·ρ⟨r⟩³`, `|∂_r m|·ρ⟨r⟩⁴`, `|∂_ρ m|·ρ⟨r⟩³`, `|∂²_ρ m|·ρ⟨r⟩²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MBoundsReport {
    pub rho_star: f64,
    pub m_minus_one: f64,
    pub dr_m: f64,
    pub drho_m: f64,
    pub drho2_m: f64,
}

impl MBoundsReport {
    pub fn ratios(&self) -> [f64; 4] {
        [self.m_minus_one, self.dr_m, self.drho_m, self.drho2_m]
    }
}

pub fn check_m_bounds(table: &JostTable, rho_star: f64) -> Result<MBoundsReport> {
    let (d1, d2) = match (&table.drho_m, &table.drho2_m) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidArgument("ρ-derivative tables were not built".into())),
    };
    let mut out = [0.0f64; 4];
    for (j, &rho) in table.rho.iter().enumerate() {
        if rho < rho_star {
            continue;
        }
        for (i, &r) in table.r.iter().enumerate() {
            let jr = (1.0 + r * r).sqrt();
            let vals = [
                (table.m[(i, j)] - 1.0).norm() * rho * jr.powi(3),
                table.dr_m[(i, j)].norm() * rho * jr.powi(4),
                d1[(i, j)].norm() * rho * jr.powi(3),
                d2[(i, j)].norm() * rho * jr.powi(2),
            ];
            for (o, v) in out.iter_mut().zip(vals) {
                if v.is_finite() {
                    *o = o.max(v);
                }
            }
        }
    }
    Ok(MBoundsReport { rho_star, m_minus_one: out[0], dr_m: out[1], drho_m: out[2], drho2_m: out[3] })
}

/// Result of the panel-wise fixed-point solve of the Volterra equation.
#[derive(Debug, Clone)]
pub struct VolterraColumn {
    pub m: Vec<Complex64>,
    /// Largest per-panel contraction factor of the fixed-point map.
    pub max_contraction: f64,
    pub max_iterations: usize,
}

/// Solve `m(r) = 1 + ∫_r^∞ (e^{2iρ(s−r)} − 1)/(2iρ) V(s) m(s) ds` panel by
/// panel inward, iterating the unknown node value to a fixed point.
///
/// The kernel separates as `(e^{−2iρr} A(r) − B(r))/(2iρ)` with
/// `A = ∫ e^{2iρs} V m`, `B = ∫ V m`; `A` uses linear Filon weights and `B`
/// the trapezoid rule, so this is a second-order cross-check of [`solve_m`].
pub fn solve_m_volterra(v: &PotentialProfile, grid: &RadialGrid, rho: f64) -> Result<VolterraColumn> {
    if rho <= 0.0 {
        return Err(Error::InvalidArgument("Volterra solve needs ρ > 0".into()));
    }
    let nodes = nodes_with_origin(grid);
    let n = nodes.len();
    let r_max = nodes[n - 1];
    let c4 = v.quartic_tail();
    let tail = if c4 == 0.0 { Complex64::new(0.0, 0.0) } else { quartic_tail_integral(rho, r_max) };
    let two_i_rho = 2.0 * I * rho;
    let vals: Vec<f64> = nodes.iter().map(|&r| v.eval(r)).collect();
    // tail contributions to A and B: ∫_R^∞ e^{2iρs} c₄ s⁻⁴ ds and ∫_R^∞ c₄ s⁻⁴ ds
    let mut a_acc = c4 * tail * Complex64::from_polar(1.0, 2.0 * rho * r_max);
    let mut b_acc = Complex64::new(c4 / (3.0 * r_max.powi(3)), 0.0);
    let mut m = vec![Complex64::new(0.0, 0.0); n];
    let eval_m = |r: f64, a: Complex64, b: Complex64| 1.0 + (Complex64::from_polar(1.0, -2.0 * rho * r) * a - b) / two_i_rho;
    m[n - 1] = eval_m(r_max, a_acc, b_acc);
    let mut max_contraction = 0.0f64;
    let mut max_iterations = 0;
    for i in (0..n - 1).rev() {
        let (lo, hi) = (nodes[i], nodes[i + 1]);
        let d = hi - lo;
        // Filon weights for ∫_lo^hi e^{2iρs} g(s) ds with g linear
        let (w0, w1) = filon_linear(2.0 * rho, d);
        let shift = Complex64::from_polar(1.0, 2.0 * rho * lo);
        let g_hi = vals[i + 1] * m[i + 1];
        let a_known = a_acc + shift * w1 * g_hi;
        let b_known = b_acc + 0.5 * d * g_hi;
        let a_coef = shift * w0 * vals[i];
        let b_coef = 0.5 * d * vals[i];
        let back = Complex64::from_polar(1.0, -2.0 * rho * lo);
        let factor = ((back * a_coef - b_coef) / two_i_rho).norm();
        max_contraction = max_contraction.max(factor);
        let mut x = m[i + 1];
        let mut iters = 0;
        loop {
            iters += 1;
            let next = 1.0 + (back * (a_known + a_coef * x) - (b_known + b_coef * x)) / two_i_rho;
            let change = (next - x).norm();
            x = next;
            if change < 1e-12 {
                break;
            }
            if iters > 200 {
                return Err(Error::NonConvergent { rho });
            }
        }
        max_iterations = max_iterations.max(iters);
        m[i] = x;
        a_acc = a_known + a_coef * x;
        b_acc = b_known + b_coef * x;
    }
    Ok(VolterraColumn { m, max_contraction, max_iterations })
}

/// Largest `|ẽ_εV − sin(rρ)|` over a table, for measuring the free limit.
pub fn free_deviation(table: &JostTable) -> f64 {
    let mut worst = 0.0f64;
    for (i, &r) in table.r.iter().enumerate() {
        for (j, &rho) in table.rho.iter().enumerate() {
            let e = table.phase[j] * table.e_real[(i, j)];
            worst = worst.max((e - (r * rho).sin()).norm());
        }
    }
    worst
}

/// Sup of `|ẽ|² + |∂_r ẽ/ρ|² − 1` over `r ∈ [r_lo, r_hi]` and `ρ ≥ rho_min`.
///
/// Low frequencies are excluded: `|m − 1|` only becomes small once `ρ⟨r⟩³ ≫ 1`.
pub fn amplitude_defect(table: &JostTable, r_lo: f64, r_hi: f64, rho_min: f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, &r) in table.r.iter().enumerate() {
        if r < r_lo || r > r_hi {
            continue;
        }
        for (j, &rho) in table.rho.iter().enumerate() {
            if rho < rho_min {
                continue;
            }
            let e = table.e_real[(i, j)];
            let de = table.dr_e_real(i, j) / rho;
            worst = worst.max((e * e + de * de - 1.0).abs());
        }
    }
    worst
}

/// Column of `e_real` restricted to grid nodes.
pub fn e_real_nodes(table: &JostTable) -> ndarray::ArrayView2<'_, f64> {
    table.e_real.slice_axis(Axis(0), ndarray::Slice::from(1..))
}
