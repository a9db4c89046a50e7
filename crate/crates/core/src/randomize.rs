//! Randomization of initial data along the distorted frequency annuli, and the
//! norms deciding membership in the admissible data class.
//!
//! Data pairs are half-line samples `u = √(4π) r f` of `(f₀, f₁)`.

use crate::dft::{lorentz_of, BumpFamily, DistortedTransform};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Exponents and size of the data class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsParams {
    pub s: f64,
    pub s1: f64,
    pub nu: f64,
    pub eps: f64,
}

impl MsParams {
    pub fn new(s: f64, s1: f64, nu: f64, eps: f64) -> Result<Self> {
        let p = MsParams { s, s1, nu, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 5.0 / 6.0) {
            return Err(Error::InvalidArgument(format!("need s > 5/6, got s = {}", self.s)));
        }
        if !(self.nu > 0.0 && self.s1 > 3.0 * self.nu) {
            return Err(Error::InvalidArgument(format!(
                "need s1 > 3·nu > 0, got s1 = {}, nu = {}",
                self.s1, self.nu
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!("need eps > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Independent standard normals `g_k` (for `f₀`) and `h_k` (for `f₁`), one per annulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomDraw {
    pub seed: u64,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl RandomDraw {
    pub fn new(seed: u64, modes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = (0..modes).map(|_| StandardNormal.sample(&mut rng)).collect();
        let h = (0..modes).map(|_| StandardNormal.sample(&mut rng)).collect();
        RandomDraw { seed, g, h }
    }

    /// All coefficients equal to `value` (deterministic control runs).
    pub fn constant(value: f64, modes: usize) -> Self {
        RandomDraw { seed: 0, g: vec![value; modes], h: vec![value; modes] }
    }
}

/// Draws for consecutive seeds `first..first + count`.
pub fn draw_batch(first: u64, count: usize, modes: usize) -> Vec<RandomDraw> {
    (0..count as u64).into_par_iter().map(|i| RandomDraw::new(first + i, modes)).collect()
}

/// `f_lo = ψ₀(−Δ)f` and `f_hi = f − f_lo`, each as `[component 0, component 1]`.
#[derive(Debug, Clone)]
pub struct LoHi {
    pub lo: [Vec<f64>; 2],
    pub hi: [Vec<f64>; 2],
}

/// Distorted-frequency pieces of a data pair.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// `(⟨f₀, Y⟩, ⟨f₁, Y⟩)`.
    pub eigen_coeffs: [f64; 2],
    pub y: Vec<f64>,
    pub kappa: f64,
    /// `P_ac f_lo + P₀ f_hi`.
    pub low: [Vec<f64>; 2],
    pub ks: Vec<usize>,
    /// `P_k f_hi` for `k ∈ ks`.
    pub pieces: Vec<[Vec<f64>; 2]>,
    /// `‖Σ_{k > k_max} P_k f_hi‖ / ‖f‖`, dropped by the truncation.
    pub truncation_tail: f64,
    /// `⟨κ f₀ + f₁, Y⟩`.
    pub orthogonality: f64,
}

impl Decomposition {
    pub fn eigen_part(&self) -> [Vec<f64>; 2] {
        [0, 1].map(|c| self.y.iter().map(|y| self.eigen_coeffs[c] * y).collect())
    }

    /// `Σ_k P_k f_hi`.
    pub fn high_part(&self) -> [Vec<f64>; 2] {
        let n = self.y.len();
        [0, 1].map(|c| {
            let mut acc = vec![0.0; n];
            for p in &self.pieces {
                for (a, b) in acc.iter_mut().zip(&p[c]) {
                    *a += b;
                }
            }
            acc
        })
    }

    /// `eigen + low + Σ_k P_k f_hi`.
    pub fn recompose(&self) -> [Vec<f64>; 2] {
        let e = self.eigen_part();
        let h = self.high_part();
        [0, 1].map(|c| (0..self.y.len()).map(|i| e[c][i] + self.low[c][i] + h[c][i]).collect())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DataNorms {
    pub hs: f64,
    pub xs: f64,
    pub xs_tilde: f64,
}

#[derive(Debug, Clone)]
pub struct DataPair {
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub split: Option<LoHi>,
    pub decomposition: Option<Decomposition>,
    pub norms: Option<DataNorms>,
}

impl DataPair {
    pub fn new(f0: Vec<f64>, f1: Vec<f64>) -> Result<Self> {
        if f0.len() != f1.len() {
            return Err(Error::InvalidArgument("data components differ in length".into()));
        }
        Ok(DataPair { f0, f1, split: None, decomposition: None, norms: None })
    }

    pub fn zeros(n: usize) -> Self {
        DataPair { f0: vec![0.0; n], f1: vec![0.0; n], split: None, decomposition: None, norms: None }
    }

    pub fn components(&self) -> [&[f64]; 2] {
        [&self.f0, &self.f1]
    }

    pub fn require_decomposition(&self) -> Result<&Decomposition> {
        self.decomposition
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("data pair has not been decomposed".into()))
    }

    /// Relative recomposition error `‖f − (eigen + low + Σ hi)‖ / ‖f‖` over both components.
    pub fn recomposition_error(&self, t: &DistortedTransform) -> Result<f64> {
        let rec = self.require_decomposition()?.recompose();
        let grid = t.grid();
        let mut num = 0.0;
        let mut den = 0.0;
        for (c, f) in self.components().into_iter().enumerate() {
            let d: Vec<f64> = f.iter().zip(&rec[c]).map(|(a, b)| a - b).collect();
            num += grid.l2(&d).powi(2);
            den += grid.l2(f).powi(2);
        }
        Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
    }
}

/// `f_lo = ψ₀(−Δ)f` through the free sine transform.
pub fn split_lo_hi(f: &DataPair, bumps: &BumpFamily, free: &DistortedTransform) -> DataPair {
    let sym = free.symbol(|r| bumps.psi0(r * r));
    let lo = [0, 1].map(|c| free.real_multiplier(f.components()[c], &sym));
    let hi = [0, 1].map(|c| f.components()[c].iter().zip(&lo[c]).map(|(a, b)| a - b).collect());
    DataPair { split: Some(LoHi { lo, hi }), ..f.clone() }
}

/// Split and decompose into eigen, low and annular pieces.
pub fn decompose(f: &DataPair, t: &DistortedTransform, free: &DistortedTransform, bumps: &BumpFamily) -> Result<DataPair> {
    let dec = t.require_dec()?;
    let split = split_lo_hi(f, bumps, free);
    let LoHi { lo, hi } = split.split.as_ref().unwrap();
    let y = dec.y().re().to_vec();
    let grid = t.grid();
    let eigen_coeffs = [0, 1].map(|c| grid.inner(f.components()[c], &y));
    let freqs = t.freqs();
    let ks: Vec<usize> = bumps.ks().collect();
    let mut low: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut by_k: Vec<Vec<Vec<f64>>> = vec![Vec::new(); ks.len()];
    let mut tail = 0.0;
    for c in 0..2 {
        let coeffs = t.coefficients(&dec.p_ac_values(&hi[c]));
        let apply = |m: &dyn Fn(f64) -> f64| -> Vec<f64> {
            let g: Vec<f64> = coeffs.iter().zip(freqs.rho()).map(|(g, &r)| g * m(r)).collect();
            dec.p_ac_values(&t.synthesize(&g))
        };
        let p0 = apply(&|r| bumps.psi0(r * r));
        low[c] = dec.p_ac_values(&lo[c]).iter().zip(&p0).map(|(a, b)| a + b).collect();
        let pieces: Vec<Vec<f64>> = ks.par_iter().map(|&k| apply(&|r| bumps.psi_k(k, r))).collect();
        for (slot, p) in by_k.iter_mut().zip(pieces) {
            slot.push(p);
        }
        tail += grid.l2(&apply(&|r| bumps.beyond(r))).powi(2);
    }
    let total = (grid.l2(&f.f0).powi(2) + grid.l2(&f.f1).powi(2)).sqrt();
    let truncation_tail = if total > 0.0 { tail.sqrt() / total } else { 0.0 };
    if truncation_tail > 1e-3 {
        return Err(Error::TruncationTail { tail: tail.sqrt(), total });
    }
    let pieces = by_k
        .into_iter()
        .map(|mut v| {
            let b = v.pop().unwrap();
            let a = v.pop().unwrap();
            [a, b]
        })
        .collect();
    let kappa = dec.kappa();
    let orthogonality = kappa * eigen_coeffs[0] + eigen_coeffs[1];
    Ok(DataPair {
        decomposition: Some(Decomposition { eigen_coeffs, y, kappa, low, ks, pieces, truncation_tail, orthogonality }),
        ..split
    })
}

/// `f^ω = eigen + low + Σ_k g_k P_k f_hi` (and `h_k` for `f₁`); the returned pair
/// carries the scaled pieces as its decomposition.
pub fn randomize(f: &DataPair, draw: &RandomDraw) -> Result<DataPair> {
    let dec = f.require_decomposition()?;
    if draw.g.len() < dec.ks.len() || draw.h.len() < dec.ks.len() {
        return Err(Error::InvalidArgument(format!(
            "draw has {} modes, decomposition needs {}",
            draw.g.len().min(draw.h.len()),
            dec.ks.len()
        )));
    }
    let pieces: Vec<[Vec<f64>; 2]> = dec
        .pieces
        .iter()
        .enumerate()
        .map(|(i, p)| {
            [
                p[0].iter().map(|x| draw.g[i] * x).collect(),
                p[1].iter().map(|x| draw.h[i] * x).collect(),
            ]
        })
        .collect();
    let scaled = Decomposition { pieces, ..dec.clone() };
    let [f0, f1] = scaled.recompose();
    Ok(DataPair { f0, f1, split: None, decomposition: Some(scaled), norms: None })
}

/// `⟨κ f₀ + f₁, Y⟩` for an arbitrary pair.
pub fn orthogonality_scalar(f0: &[f64], f1: &[f64], t: &DistortedTransform) -> Result<f64> {
    let dec = t.require_dec()?;
    let y = dec.y().re();
    Ok(dec.kappa() * t.grid().inner(f0, y) + t.grid().inner(f1, y))
}

fn symbol_l2(u: &[f64], free: &DistortedTransform, m: impl Fn(f64) -> f64) -> f64 {
    let g = free.coefficients(u);
    g.iter()
        .zip(free.freqs().rho())
        .zip(free.freqs().w())
        .map(|((g, &r), w)| w * (g * m(r)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `‖f₀‖_{Ḣ^s} + ‖f₁‖_{H^{s−1}}` on the free side.
pub fn hs_norm(f0: &[f64], f1: &[f64], s: f64, free: &DistortedTransform) -> f64 {
    symbol_l2(f0, free, |r| r.powf(s)) + symbol_l2(f1, free, |r| (1.0 + r * r).powf(0.5 * (s - 1.0)))
}

fn weighted_l2(u: &[f64], free: &DistortedTransform, exponent: f64) -> f64 {
    let grid = free.grid();
    grid.r()
        .iter()
        .zip(grid.w())
        .zip(u)
        .map(|((r, w), u)| w * u * u * (1.0 + r * r).powf(exponent))
        .sum::<f64>()
        .sqrt()
}

/// `‖f‖_{ℋ^s} + ‖⟨x⟩^{1−ν}|∇|^{s₁}f₀‖ + ‖⟨x⟩^{1−ν}⟨∇⟩^{s₁−1}f₁‖`.
pub fn norm_xs(f: &DataPair, p: &MsParams, free: &DistortedTransform) -> f64 {
    let d0 = free.real_multiplier(&f.f0, &free.symbol(|r| r.powf(p.s1)));
    let d1 = free.real_multiplier(&f.f1, &free.symbol(|r| (1.0 + r * r).powf(0.5 * (p.s1 - 1.0))));
    hs_norm(&f.f0, &f.f1, p.s, free) + weighted_l2(&d0, free, 1.0 - p.nu) + weighted_l2(&d1, free, 1.0 - p.nu)
}

/// `‖f‖_{ℋ^s}` plus the `L^{3/2,1}` norms of `|∇|^s` and `⟨∇⟩^{s−1}` applied to
/// `P_ac f_lo + P₀ f_hi`.
pub fn norm_xs_tilde(f: &DataPair, p: &MsParams, free: &DistortedTransform) -> Result<f64> {
    let dec = f.require_decomposition()?;
    let grid = free.grid();
    let g0 = free.real_multiplier(&dec.low[0], &free.symbol(|r| r.powf(p.s)));
    let g1 = free.real_multiplier(&dec.low[1], &free.symbol(|r| (1.0 + r * r).powf(0.5 * (p.s - 1.0))));
    Ok(hs_norm(&f.f0, &f.f1, p.s, free) + lorentz_of(&g0, grid, 1.5, 1.0)? + lorentz_of(&g1, grid, 1.5, 1.0)?)
}

pub fn data_norms(f: &DataPair, p: &MsParams, free: &DistortedTransform) -> Result<DataNorms> {
    Ok(DataNorms { hs: hs_norm(&f.f0, &f.f1, p.s, free), xs: norm_xs(f, p, free), xs_tilde: norm_xs_tilde(f, p, free)? })
}

/// Tail constants `(c, C)` of `P(‖·‖ > λ) ≤ C e^{−cλ²/‖f‖²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailConstants {
    pub c: f64,
    pub big_c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub inside: bool,
    pub reasons: Vec<String>,
    pub orthogonality: f64,
    pub xs: f64,
    pub xs_tilde: f64,
    /// `√(cε²/log C)`.
    pub xs_threshold: f64,
}

/// Tests the three membership conditions; orthogonality is relative to `‖f‖₂` with `tol`.
pub fn membership_ms(
    f: &DataPair,
    p: &MsParams,
    tails: TailConstants,
    tol: f64,
    t: &DistortedTransform,
    free: &DistortedTransform,
) -> Result<MembershipReport> {
    if !(tails.big_c > 1.0 && tails.c > 0.0) {
        return Err(Error::InvalidArgument(format!("tail constants need c > 0, C > 1, got {tails:?}")));
    }
    let orthogonality = orthogonality_scalar(&f.f0, &f.f1, t)?;
    let grid = t.grid();
    let scale = grid.l2(&f.f0) + grid.l2(&f.f1);
    let xs = norm_xs(f, p, free);
    let xs_tilde = norm_xs_tilde(f, p, free)?;
    let xs_threshold = (tails.c * p.eps * p.eps / tails.big_c.ln()).sqrt();
    let mut reasons = Vec::new();
    if orthogonality.abs() > tol * scale {
        reasons.push(format!("orthogonality ⟨κf₀+f₁, Y⟩ = {orthogonality:.3e}"));
    }
    if xs_tilde >= p.eps {
        reasons.push(format!("X̃_s norm {xs_tilde:.3e} ≥ eps = {:.3e}", p.eps));
    }
    if xs >= xs_threshold {
        reasons.push(format!("X_s norm {xs:.3e} ≥ threshold {xs_threshold:.3e}"));
    }
    Ok(MembershipReport { inside: reasons.is_empty(), reasons, orthogonality, xs, xs_tilde, xs_threshold })
}
