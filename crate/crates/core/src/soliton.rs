//! The ground-state family `φ_a(r) = (3a)^{1/4}(1 + a r²)^{-1/2}`, its scaling
//! derivative (the zero resonance) and the linearized potential `V_a = −5φ_a⁴`.

use crate::error::{Error, Result};
use crate::grid::{lorentz_profile, second_derivative4, RadialFunction, RadialGrid, SQRT_4PI};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonParams {
    pub a: f64,
}

impl SolitonParams {
    pub fn new(a: f64) -> Result<Self> {
        if a > 0.0 && a.is_finite() {
            Ok(SolitonParams { a })
        } else {
            Err(Error::InvalidArgument(format!("soliton scale a = {a} must be positive")))
        }
    }

    /// Modulation runs keep `a` inside `(1/2, 3/2)`.
    pub fn check_window(&self) -> Result<()> {
        if self.a > 0.5 && self.a < 1.5 {
            Ok(())
        } else {
            Err(Error::ModulationWindow(self.a))
        }
    }
}

/// `φ_a(r)`.
pub fn phi_at(a: f64, r: f64) -> f64 {
    (3.0 * a).powf(0.25) / (1.0 + a * r * r).sqrt()
}

/// `∂_a φ_a(r)`.
pub fn resonance_at(a: f64, r: f64) -> f64 {
    let s = 1.0 + a * r * r;
    0.25 * 3f64.powf(0.25) * a.powf(-0.75) / s.sqrt() - 0.5 * r * r * (3.0 * a).powf(0.25) / s.powf(1.5)
}

/// `V_a(r) = −5 φ_a(r)⁴ = −15 a / (1 + a r²)²`.
pub fn potential_at(a: f64, r: f64) -> f64 {
    let s = 1.0 + a * r * r;
    -15.0 * a / (s * s)
}

/// `∂_r V_a(r)`.
pub fn potential_derivative_at(a: f64, r: f64) -> f64 {
    let s = 1.0 + a * r * r;
    60.0 * a * a * r / (s * s * s)
}

/// `∂_a V_a(r)`.
pub fn potential_a_derivative_at(a: f64, r: f64) -> f64 {
    let s = 1.0 + a * r * r;
    -15.0 / (s * s) + 30.0 * a * r * r / (s * s * s)
}

/// Soliton profile in half-line form.
pub fn phi(params: SolitonParams, grid: &RadialGrid) -> RadialFunction {
    RadialFunction::from_profile(grid, |r| phi_at(params.a, r))
}

/// Zero resonance `∂_a φ_a` in half-line form.
pub fn resonance(params: SolitonParams, grid: &RadialGrid) -> RadialFunction {
    RadialFunction::from_profile(grid, |r| resonance_at(params.a, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind {
    Soliton { a: f64 },
    /// `ε·V_a`, used to interpolate towards the free case.
    ScaledSoliton { a: f64, scale: f64 },
    Zero,
}

/// A radial potential sampled on a grid (pointwise values, not half-line form).
#[derive(Debug, Clone)]
pub struct PotentialProfile {
    kind: PotentialKind,
    values: Vec<f64>,
    tail_constant: f64,
}

impl PotentialProfile {
    pub fn new(kind: PotentialKind, grid: &RadialGrid) -> Self {
        let values: Vec<f64> = grid.r().iter().map(|&r| eval_kind(kind, r)).collect();
        let tail_constant = grid
            .r()
            .iter()
            .zip(&values)
            .map(|(r, v)| r.powi(4) * v.abs())
            .fold(0.0, f64::max);
        PotentialProfile { kind, values, tail_constant }
    }

    pub fn zero(grid: &RadialGrid) -> Self {
        Self::new(PotentialKind::Zero, grid)
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// `sup r⁴|V|` over the grid.
    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }
    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
            || matches!(self.kind, PotentialKind::ScaledSoliton { scale, .. } if scale == 0.0)
    }
    /// Parameter of the generating soliton, if the potential is exactly `V_a`.
    pub fn soliton_a(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Soliton { a } => Some(a),
            _ => None,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        eval_kind(self.kind, r)
    }

    /// Coefficient `c₄` of the far-field model `V ≈ c₄ / r⁴`.
    pub fn quartic_tail(&self) -> f64 {
        match self.kind {
            PotentialKind::Soliton { a } => -15.0 / a,
            PotentialKind::ScaledSoliton { a, scale } => -15.0 * scale / a,
            PotentialKind::Zero => 0.0,
        }
    }
}

fn eval_kind(kind: PotentialKind, r: f64) -> f64 {
    match kind {
        PotentialKind::Soliton { a } => potential_at(a, r),
        PotentialKind::ScaledSoliton { a, scale } => scale * potential_at(a, r),
        PotentialKind::Zero => 0.0,
    }
}

pub fn potential(params: SolitonParams, grid: &RadialGrid) -> PotentialProfile {
    PotentialProfile::new(PotentialKind::Soliton { a: params.a }, grid)
}

/// `N(x, y) = (x + y)⁵ − y⁵ − 5y⁴x`, expanded so that no cancellation occurs.
pub fn nonlinearity(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(&x, &y)| nonlinearity_at(x, y)).collect()
}

#[inline]
pub fn nonlinearity_at(x: f64, y: f64) -> f64 {
    let x2 = x * x;
    let y2 = y * y;
    x2 * (10.0 * y2 * y + 10.0 * y2 * x + 5.0 * y * x2 + x2 * x)
}

/// Grid-interior L² residual of a half-line function against the radial
/// Laplacian: `‖u'' + s(r)‖` over nodes with `r ≤ r_cut`.
fn interior_residual(grid: &RadialGrid, u: &[f64], source: &[f64], r_cut: f64) -> Result<f64> {
    let h = grid.require_uniform()?;
    let d2 = second_derivative4(u, h);
    let mut s = 0.0;
    for i in 0..grid.len() {
        if grid.r()[i] > r_cut {
            break;
        }
        let e = d2[i] + source[i];
        s += grid.w()[i] * e * e;
    }
    Ok(s.sqrt())
}

fn residual_cut(grid: &RadialGrid) -> f64 {
    grid.r_max() - 4.0 * grid.spacing().unwrap_or(0.0)
}

/// `‖Δφ_a + φ_a⁵‖_{L²}` on the grid interior.
pub fn elliptic_residual(params: SolitonParams, grid: &RadialGrid) -> Result<f64> {
    let u = phi(params, grid).into_re();
    let src: Vec<f64> = grid
        .r()
        .iter()
        .zip(&u)
        .map(|(&r, &u)| u * phi_at(params.a, r).powi(4))
        .collect();
    interior_residual(grid, &u, &src, residual_cut(grid))
}

/// `‖(−Δ + V_a) ∂_aφ_a‖_{L²}` on the grid interior.
pub fn resonance_residual(params: SolitonParams, grid: &RadialGrid) -> Result<f64> {
    let u = resonance(params, grid).into_re();
    let src: Vec<f64> = grid
        .r()
        .iter()
        .zip(&u)
        .map(|(&r, &u)| -potential_at(params.a, r) * u)
        .collect();
    interior_residual(grid, &u, &src, residual_cut(grid))
}

/// `sup_t ‖⟨x⟩^{1+θ}(V − V_{a(t)})‖_{L^{p,q}} / ‖ȧ‖_{L¹}` over the sampled path.
///
/// Returns 0 for a constant path. `a_dot_l1` is the L¹ norm of `ȧ` over the
/// same window.
pub fn check_potential_difference(
    path: &[(f64, f64)],
    a_dot_l1: f64,
    grid: &RadialGrid,
    theta: f64,
    p: f64,
    q: f64,
) -> Result<f64> {
    if theta >= 3.0 - 3.0 / p {
        return Err(Error::InvalidArgument(format!(
            "weight exponent θ = {theta} must stay below 3 − 3/p = {}",
            3.0 - 3.0 / p
        )));
    }
    let mut sup = 0.0f64;
    for &(_, a) in path {
        SolitonParams::new(a)?.check_window()?;
        let g: Vec<f64> = grid
            .r()
            .iter()
            .map(|&r| (1.0 + r * r).powf(0.5 * (1.0 + theta)) * (potential_at(1.0, r) - potential_at(a, r)))
            .collect();
        sup = sup.max(lorentz_profile(grid, &g, p, q)?);
    }
    if sup == 0.0 {
        return Ok(0.0);
    }
    Ok(sup / a_dot_l1)
}

/// `⟨f, g⟩_{L²(ℝ³)}` of two radial profiles given pointwise, by quadrature.
pub fn profile_inner(grid: &RadialGrid, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
    4.0 * std::f64::consts::PI * grid.integrate_fn(|r| r * r * f(r) * g(r))
}

/// Half-line samples of `φ_a − a^{-5/4}·∂_aφ_a|_{a=1}`, the profile paired with ȧ.
pub fn modulation_profile(a: f64, grid: &RadialGrid) -> Vec<f64> {
    let c = a.powf(-1.25);
    grid.r()
        .iter()
        .map(|&r| SQRT_4PI * r * (resonance_at(a, r) - c * resonance_at(1.0, r)))
        .collect()
}
