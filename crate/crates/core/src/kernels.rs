//! Oscillatory kernels of the frequency-localized propagators
//! `K_k(t, r, r′) = ∫ e^{itρ} ψ_k(ρ) ẽ(r, ρ) conj(ẽ(r′, ρ)) dρ`.
//!
//! Writing `f = e^{irρ}α + e^{−irρ}β` with slowly varying amplitudes gives
//! `e_R(r, ρ) = e^{irρ}P(r, ρ) + e^{−irρ}conj(P(r, ρ))`, where
//! `P = (Aα − conj(A β))/(2i)` and `A = conj(f(0))/|f(0)|`. The kernel is then a
//! sum of four integrals with the known phases `t ± r ± r′`, each done by
//! Filon quadrature against a cubic interpolant of the smooth remainder.

use crate::dft::{BumpFamily, DistortedTransform};
use crate::error::{Error, Result};
use crate::quad::filon_cubic;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest phase advance `|ω|·Δρ` per frequency step before the piecewise-cubic
/// interpolation noise (∝ ω⁻²) can exceed the cubic decay being certified.
pub const MAX_PHASE_PER_STEP: f64 = 8.0;

/// Kernel values on a set of points with their ratios against the decay bound.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSample {
    pub k: usize,
    pub points: Vec<(f64, f64, f64)>,
    pub values: Vec<Complex64>,
    pub bound_ratios: Vec<f64>,
}

/// Precomputed frequency window and bump samples for one `k`.
///
/// Each frequency interval of the table is one Filon panel of three sub-intervals;
/// `ψ_k` is sampled exactly on the sub-nodes and the amplitudes are interpolated.
pub struct KernelEvaluator<'a> {
    t: &'a DistortedTransform,
    k: usize,
    j_lo: usize,
    panels: usize,
    /// `ψ_k` on the sub-nodes.
    psi: Vec<f64>,
    /// `A(ρ_j)` on the table nodes `j_lo − 1 ..= j_lo + panels + 1`.
    phase: Vec<Complex64>,
    /// `A/(2i)` on the sub-nodes: the amplitude with `α = 1, β = 0`.
    bare: Vec<Complex64>,
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Right-hand side of the kernel decay estimate, summed over the four sign choices.
pub fn kernel_bound(k: usize, t: f64, r: f64, rp: f64) -> f64 {
    let weight = 1.0 / japanese(r) + 1.0 / japanese(rp);
    let mut sum = 0.0;
    for c1 in [1.0, -1.0] {
        for c2 in [1.0, -1.0] {
            let d = japanese(t + c1 * (r + c2 * rp)).powi(3);
            sum += weight / (k as f64 * d) + 1.0 / d;
        }
    }
    sum
}

/// Lagrange weights for the 4 nodes `xs` at `x`.
fn lagrange4(xs: &[f64], x: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for a in 0..4 {
        for b in 0..4 {
            if a != b {
                w[a] *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
    }
    w
}

/// Cubic weights at offsets 1/3 and 2/3 between the middle nodes of 4 equispaced points.
const THIRDS: [[f64; 4]; 2] = [
    [-5.0 / 81.0, 60.0 / 81.0, 30.0 / 81.0, -4.0 / 81.0],
    [-4.0 / 81.0, 30.0 / 81.0, 60.0 / 81.0, -5.0 / 81.0],
];

impl<'a> KernelEvaluator<'a> {
    pub fn new(k: usize, t: &'a DistortedTransform, bumps: &BumpFamily) -> Result<Self> {
        if k < bumps.k0.max(1) || k > bumps.k_max {
            return Err(Error::ProjectionIndex { k, k0: bumps.k0 });
        }
        let freqs = t.freqs();
        let step = freqs.step();
        let last = freqs.len() - 1;
        let lo = ((k as f64 - bumps.width) / step).floor().max(2.0) as usize;
        let hi = ((k as f64 + 1.0 + bumps.width) / step).ceil() as usize;
        if hi + 1 > last {
            return Err(Error::InvalidArgument(format!("bump k = {k} extends past rho_max")));
        }
        let panels = hi - lo;
        let psi = (0..=3 * panels)
            .map(|q| bumps.psi_k(k, freqs.rho()[lo] + q as f64 * step / 3.0))
            .collect();
        let phase: Vec<Complex64> = (lo - 1..=hi + 1)
            .map(|j| t.jost().map_or(Complex64::new(1.0, 0.0), |jt| jt.phase[j]))
            .collect();
        let mut ev = KernelEvaluator { t, k, j_lo: lo, panels, psi, phase, bare: Vec::new() };
        let coarse: Vec<Complex64> = ev.phase.iter().map(|a| a / (2.0 * I)).collect();
        ev.bare = ev.refine(&coarse);
        Ok(ev)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Table-node values on `j_lo − 1 ..= j_lo + panels + 1` to the sub-nodes.
    fn refine(&self, coarse: &[Complex64]) -> Vec<Complex64> {
        let mut fine = Vec::with_capacity(3 * self.panels + 1);
        for p in 0..self.panels {
            let c = &coarse[p..p + 4];
            fine.push(c[1]);
            for w in THIRDS {
                fine.push(c[0] * w[0] + c[1] * w[1] + c[2] * w[2] + c[3] * w[3]);
            }
        }
        fine.push(coarse[self.panels + 1]);
        fine
    }

    /// `P(r, ·)` on the sub-nodes; the free case is `1/(2i)`.
    pub fn amplitude(&self, r: f64) -> Vec<Complex64> {
        let Some(jost) = self.t.jost().filter(|j| !j.is_free()) else {
            return vec![-0.5 * I; 3 * self.panels + 1];
        };
        let rows = jost.r();
        let r = r.min(*rows.last().unwrap());
        let idx = rows.partition_point(|&x| x < r);
        let start = idx.saturating_sub(2).min(rows.len() - 4);
        let weights = lagrange4(&rows[start..start + 4], r);
        let coarse: Vec<Complex64> = self
            .phase
            .iter()
            .enumerate()
            .map(|(jj, &a)| {
                let j = self.j_lo - 1 + jj;
                let (mut alpha, mut beta) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for (q, w) in weights.iter().enumerate() {
                    let (al, be) = jost.amplitudes(start + q, j);
                    alpha += w * al;
                    beta += w * be;
                }
                (a * alpha - (a * beta).conj()) / (2.0 * I)
            })
            .collect();
        self.refine(&coarse)
    }

    fn filon(&self, omega: f64, g: impl Fn(usize) -> Complex64) -> Result<Complex64> {
        let step = self.t.freqs().step();
        if omega.abs() * step > MAX_PHASE_PER_STEP {
            let factor = (omega.abs() * step / MAX_PHASE_PER_STEP).ceil() as usize;
            return Err(Error::PhaseTooLarge { phase: omega, panel: step, factor });
        }
        let w = filon_cubic(omega, step / 3.0);
        let rho0 = self.t.freqs().rho()[self.j_lo];
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..self.panels {
            let base = 3 * p;
            let origin = Complex64::from_polar(1.0, omega * (rho0 + p as f64 * step));
            let mut panel = Complex64::new(0.0, 0.0);
            for (q, wq) in w.iter().enumerate() {
                panel += wq * g(base + q);
            }
            acc += origin * panel;
        }
        Ok(acc)
    }

    /// `K_k(t, r, r′)` from precomputed amplitudes at `r` and `r′`.
    pub fn eval_with(&self, time: f64, r: f64, rp: f64, pr: &[Complex64], prp: &[Complex64]) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for (sr, conj_r) in [(1.0, false), (-1.0, true)] {
            for (srp, conj_rp) in [(1.0, false), (-1.0, true)] {
                let omega = time + sr * r + srp * rp;
                total += self.filon(omega, |q| {
                    let a = if conj_r { pr[q].conj() } else { pr[q] };
                    let b = if conj_rp { prp[q].conj() } else { prp[q] };
                    self.psi[q] * a * b
                })?;
            }
        }
        Ok(total)
    }

    pub fn eval(&self, time: f64, r: f64, rp: f64) -> Result<Complex64> {
        self.eval_with(time, r, rp, &self.amplitude(r), &self.amplitude(rp))
    }

    /// `G_k(r, r′)`: `K_k(0, r, r′)` minus the four terms with `α = 1, β = 0`.
    pub fn eval_g(&self, r: f64, rp: f64) -> Result<Complex64> {
        let full = self.eval(0.0, r, rp)?;
        Ok(full - self.eval_with(0.0, r, rp, &self.bare, &self.bare)?)
    }
}

pub fn kernel_k(k: usize, time: f64, r: f64, rp: f64, t: &DistortedTransform, bumps: &BumpFamily) -> Result<Complex64> {
    if time < 0.0 || r < 0.0 || rp < 0.0 {
        return Err(Error::InvalidArgument("kernel arguments must be nonnegative".into()));
    }
    KernelEvaluator::new(k, t, bumps)?.eval(time, r, rp)
}

pub fn kernel_g(k: usize, r: f64, rp: f64, t: &DistortedTransform, bumps: &BumpFamily) -> Result<Complex64> {
    KernelEvaluator::new(k, t, bumps)?.eval_g(r, rp)
}

/// Sample points for certification: uniform random triples plus the light-cone
/// lines `t = r + r′` and `t = |r − r′|`.
pub fn certification_points(n_random: usize, t_max: f64, r_max: f64, seed: u64) -> Vec<(f64, f64, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<(f64, f64, f64)> = (0..n_random)
        .map(|_| (rng.random_range(0.0..t_max), rng.random_range(0.0..r_max), rng.random_range(0.0..r_max)))
        .collect();
    let line = n_random / 10;
    for _ in 0..line {
        let r: f64 = rng.random_range(0.0..r_max);
        let rp: f64 = rng.random_range(0.0..r_max);
        if r + rp <= t_max {
            pts.push((r + rp, r, rp));
        }
        pts.push(((r - rp).abs(), r, rp));
    }
    pts
}

/// Kernel values and bound ratios for one `k`.
pub fn sample_kernel(k: usize, points: &[(f64, f64, f64)], t: &DistortedTransform, bumps: &BumpFamily) -> Result<KernelSample> {
    let ev = KernelEvaluator::new(k, t, bumps)?;
    let values = points
        .par_iter()
        .map(|&(time, r, rp)| ev.eval(time, r, rp))
        .collect::<Result<Vec<_>>>()?;
    let bound_ratios = points.iter().zip(&values).map(|(&(time, r, rp), v)| v.norm() / kernel_bound(k, time, r, rp)).collect();
    Ok(KernelSample { k, points: points.to_vec(), values, bound_ratios })
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCertificate {
    pub ks: Vec<usize>,
    pub sup_ratio: Vec<f64>,
    /// max/min of `sup_ratio` over k.
    pub spread: f64,
    pub samples: Vec<KernelSample>,
}

/// Sup of `|K_k|` over the sample against the decay bound for each `k`; fails if the
/// sup is not uniform in `k` (spread ≥ 3).
pub fn certify_kernel_bound(
    ks: &[usize],
    sample_size: usize,
    t_max: f64,
    seed: u64,
    t: &DistortedTransform,
    bumps: &BumpFamily,
) -> Result<KernelCertificate> {
    let points = certification_points(sample_size, t_max, t.grid().r_max(), seed);
    let samples = ks.iter().map(|&k| sample_kernel(k, &points, t, bumps)).collect::<Result<Vec<_>>>()?;
    let sup_ratio: Vec<f64> = samples.iter().map(|s| s.bound_ratios.iter().cloned().fold(0.0, f64::max)).collect();
    let max = sup_ratio.iter().cloned().fold(0.0, f64::max);
    let min = sup_ratio.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = max / min;
    let cert = KernelCertificate { ks: ks.to_vec(), sup_ratio, spread, samples };
    if !(spread < 3.0) {
        return Err(Error::BoundViolated(format!("kernel sup ratio spread {spread:.3} over k = {ks:?}")));
    }
    Ok(cert)
}

/// `|G_k|·k·⟨r − r′⟩² / (⟨r⟩⁻² + ⟨r′⟩⁻²)`.
pub fn g_bound_ratio(k: usize, r: f64, rp: f64, g: Complex64) -> f64 {
    g.norm() * k as f64 * japanese(r - rp).powi(2) / (japanese(r).powi(-2) + japanese(rp).powi(-2))
}

/// `∫ |G_k(r, r′)| dr′` on the radial grid.
pub fn g_row_integral(k: usize, r: f64, t: &DistortedTransform, bumps: &BumpFamily) -> Result<f64> {
    let ev = KernelEvaluator::new(k, t, bumps)?;
    let grid = t.grid();
    let pr = ev.amplitude(r);
    let vals = grid
        .r()
        .par_iter()
        .map(|&rp| {
            let full = ev.eval_with(0.0, r, rp, &pr, &ev.amplitude(rp))?;
            Ok((full - ev.eval_with(0.0, r, rp, &ev.bare, &ev.bare)?).norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(grid.integrate(&vals))
}

/// `P_k u` through its kernel: `c² ∫ K_k(0, r, r′) u(r′) dr′` at the requested radii.
pub fn apply_projection_kernel(k: usize, u: &[f64], at: &[f64], t: &DistortedTransform, bumps: &BumpFamily) -> Result<Vec<f64>> {
    let ev = KernelEvaluator::new(k, t, bumps)?;
    let grid = t.grid();
    let amps: Vec<Vec<Complex64>> = grid.r().par_iter().map(|&rp| ev.amplitude(rp)).collect();
    let c2 = t.c_norm().powi(2);
    at.par_iter()
        .map(|&r| {
            let pr = ev.amplitude(r);
            let mut acc = 0.0;
            for (i, (&w, &ui)) in grid.w().iter().zip(u).enumerate() {
                if ui != 0.0 {
                    acc += w * ui * ev.eval_with(0.0, r, grid.r()[i], &pr, &amps[i])?.re;
                }
            }
            Ok(c2 * acc)
        })
        .collect()
}
