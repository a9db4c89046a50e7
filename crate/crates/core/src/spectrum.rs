//! The bound state `(−κ², Y)` of `H = −d²/dr² + V` on the half-line, the
//! zero-resonance diagnostics and the projection onto the continuous spectrum.

use crate::error::{Error, Result};
use crate::grid::{make_grid, second_derivative4, RadialFunction, RadialGrid};
use crate::quad::linear_fit;
use crate::soliton::PotentialProfile;
use serde::Serialize;

/// Matching radius for the two shooting branches.
const MATCH_RADIUS: f64 = 2.0;
/// RK4 step ceiling for shooting.
const SHOOT_STEP: f64 = 0.0025;

#[derive(Debug, Clone)]
pub struct EigenPair {
    /// `κ` from shooting.
    pub kappa: f64,
    /// `κ²` from the Richardson-extrapolated finite-difference matrix.
    pub kappa_sq_matrix: f64,
    /// `κ²` from shooting.
    pub kappa_sq_shooting: f64,
    /// Unit-norm eigenfunction with `Y(0⁺) > 0`.
    pub y: RadialFunction,
    /// Slope magnitude of `log|Y|` fitted on `[5, 25]`.
    pub decay_rate: f64,
    pub decay_r2: f64,
}

impl EigenPair {
    pub fn matrix_shooting_defect(&self) -> f64 {
        (self.kappa_sq_matrix - self.kappa_sq_shooting).abs() / self.kappa_sq_shooting
    }
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// constant off-diagonal `off` (Sturm sequence).
fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    let off2 = off * off;
    for (i, d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - off2 / q };
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Dirichlet FD matrix diagonal for `−u'' + Vu` on a uniform grid (last node excluded).
fn fd_diagonal(v: &PotentialProfile, grid: &RadialGrid) -> Result<(Vec<f64>, f64)> {
    let h = grid.require_uniform()?;
    let n = grid.len() - 1;
    let diag = (0..n).map(|i| 2.0 / (h * h) + v.eval(grid.r()[i])).collect();
    Ok((diag, -1.0 / (h * h)))
}

/// Count of negative radial eigenvalues of the discretized operator.
pub fn negative_count(v: &PotentialProfile, grid: &RadialGrid) -> Result<usize> {
    let (diag, off) = fd_diagonal(v, grid)?;
    Ok(sturm_count(&diag, off, 0.0))
}

fn lowest_fd_eigenvalue(v: &PotentialProfile, grid: &RadialGrid) -> Result<f64> {
    let (diag, off) = fd_diagonal(v, grid)?;
    let mut lo = diag.iter().fold(f64::INFINITY, |m, d| m.min(*d)) + 2.0 * off;
    let mut hi = 0.0;
    while hi - lo > 1e-15 * lo.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if sturm_count(&diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn rk4_step(v: &PotentialProfile, e: f64, r: f64, h: f64, y: [f64; 2]) -> [f64; 2] {
    let f = |r: f64, y: [f64; 2]| [y[1], (v.eval(r) - e) * y[0]];
    let k1 = f(r, y);
    let k2 = f(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Integrate from `r0` to `r1` with steps no longer than `SHOOT_STEP`.
fn propagate(v: &PotentialProfile, e: f64, r0: f64, r1: f64, mut y: [f64; 2]) -> [f64; 2] {
    let steps = ((r1 - r0).abs() / SHOOT_STEP).ceil().max(1.0) as usize;
    let h = (r1 - r0) / steps as f64;
    for s in 0..steps {
        y = rk4_step(v, e, r0 + s as f64 * h, h, y);
    }
    y
}

/// Normalized Wronskian mismatch at the matching radius.
fn mismatch(v: &PotentialProfile, e: f64, r_max: f64) -> f64 {
    let kappa = (-e).max(0.0).sqrt();
    let out = propagate(v, e, 0.0, MATCH_RADIUS, [0.0, 1.0]);
    let inw = propagate(v, e, r_max, MATCH_RADIUS, [1.0, -kappa]);
    (out[0] * inw[1] - out[1] * inw[0]) / (out[0].hypot(out[1]) * inw[0].hypot(inw[1]))
}

fn shoot_eigenvalue(v: &PotentialProfile, guess: f64, r_max: f64) -> Result<f64> {
    let (mut e0, mut e1) = (guess * (1.0 + 1e-4), guess * (1.0 - 1e-4));
    let (mut f0, mut f1) = (mismatch(v, e0, r_max), mismatch(v, e1, r_max));
    for _ in 0..60 {
        if f1 == f0 {
            break;
        }
        let e2 = e1 - f1 * (e1 - e0) / (f1 - f0);
        e0 = e1;
        f0 = f1;
        e1 = e2;
        f1 = mismatch(v, e1, r_max);
        if (e1 - e0).abs() < 1e-14 * e1.abs() {
            return Ok(e1);
        }
    }
    if (e1 - e0).abs() < 1e-10 * e1.abs() {
        Ok(e1)
    } else {
        Err(Error::Residual { what: "shooting eigenvalue", residual: f1.abs(), tol: 1e-10 })
    }
}

/// Shooting eigenfunction sampled at the grid nodes, unit L² norm, positive near 0.
fn shooting_eigenfunction(v: &PotentialProfile, e: f64, grid: &RadialGrid) -> Vec<f64> {
    let kappa = (-e).sqrt();
    let r = grid.r();
    let n = r.len();
    let m = grid.nearest(MATCH_RADIUS);
    let mut u = vec![0.0; n];
    let mut y = [0.0, 1.0];
    let mut pos = 0.0;
    for i in 0..=m {
        y = propagate(v, e, pos, r[i], y);
        pos = r[i];
        u[i] = y[0];
    }
    let out_match = u[m];
    let mut y = [1.0, -kappa];
    u[n - 1] = 1.0;
    let mut pos = r[n - 1];
    let mut inward = vec![0.0; n];
    inward[n - 1] = 1.0;
    for i in (m..n - 1).rev() {
        y = propagate(v, e, pos, r[i], y);
        pos = r[i];
        inward[i] = y[0];
    }
    let scale = out_match / inward[m];
    for i in m + 1..n {
        u[i] = scale * inward[i];
    }
    let norm = grid.l2(&u);
    let sign = if u[0] > 0.0 { 1.0 } else { -1.0 };
    u.iter().map(|x| sign * x / norm).collect()
}

/// Unique negative eigenvalue `−κ²` and eigenfunction of `−d²/dr² + V`.
pub fn solve_eigen(v: &PotentialProfile, grid: &RadialGrid) -> Result<EigenPair> {
    match negative_count(v, grid)? {
        0 => return Err(Error::NoNegativeEigenvalue),
        1 => {}
        k => return Err(Error::MultipleNegativeEigenvalues(k)),
    }
    let fine = grid.refine();
    let finest = fine.refine();
    let e_h = lowest_fd_eigenvalue(v, grid)?;
    let e_h2 = lowest_fd_eigenvalue(v, &fine)?;
    let e_h4 = lowest_fd_eigenvalue(v, &finest)?;
    // E(h) = E + c₂h² + c₄h⁴ + …
    let e_matrix = (64.0 * e_h4 - 20.0 * e_h2 + e_h) / 45.0;
    let e_shoot = shoot_eigenvalue(v, e_matrix, grid.r_max())?;
    let kappa = (-e_shoot).sqrt();
    let y = shooting_eigenfunction(v, e_shoot, grid);

    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .r()
        .iter()
        .zip(&y)
        .filter(|(r, u)| **r >= 5.0 && **r <= 25.0 && u.abs() > 0.0)
        .map(|(r, u)| (*r, u.abs().ln()))
        .unzip();
    let (slope, _, r2) = if xs.len() >= 2 { linear_fit(&xs, &ys) } else { (f64::NAN, 0.0, 0.0) };

    Ok(EigenPair {
        kappa,
        kappa_sq_matrix: -e_matrix,
        kappa_sq_shooting: -e_shoot,
        y: RadialFunction::real(y),
        decay_rate: -slope,
        decay_r2: r2,
    })
}

/// Bound state plus the projection `P_ac f = f − ⟨Y, f⟩Y`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eig: EigenPair,
    grid: RadialGrid,
}

impl SpectralDecomposition {
    pub fn new(eig: EigenPair, grid: &RadialGrid) -> Self {
        SpectralDecomposition { eig, grid: grid.clone() }
    }

    pub fn build(v: &PotentialProfile, grid: &RadialGrid) -> Result<Self> {
        Ok(Self::new(solve_eigen(v, grid)?, grid))
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
    pub fn kappa(&self) -> f64 {
        self.eig.kappa
    }
    pub fn y(&self) -> &RadialFunction {
        &self.eig.y
    }

    /// `⟨Y, f⟩` of the real part.
    pub fn eigen_coeff(&self, f: &[f64]) -> f64 {
        self.grid.inner(self.eig.y.re(), f)
    }

    pub fn p_ac_values(&self, f: &[f64]) -> Vec<f64> {
        let c = self.eigen_coeff(f);
        f.iter().zip(self.eig.y.re()).map(|(f, y)| f - c * y).collect()
    }

    pub fn p_ac(&self, f: &RadialFunction) -> RadialFunction {
        let re = self.p_ac_values(f.re());
        match f.im() {
            None => RadialFunction::real(re),
            Some(im) => {
                let im = self.p_ac_values(im);
                let values: Vec<_> =
                    re.iter().zip(&im).map(|(a, b)| num_complex::Complex64::new(*a, *b)).collect();
                RadialFunction::complex(&values)
            }
        }
    }
}

pub fn p_ac(f: &RadialFunction, dec: &SpectralDecomposition) -> RadialFunction {
    dec.p_ac(f)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    /// `‖Hφ‖_{L²}` over the grid interior.
    pub residual: f64,
    /// Slope of `R ↦ ‖φ‖²_{L²(r<R)}` over `R ∈ [10, 40]`.
    pub growth_slope: f64,
    pub growth_r2: f64,
    /// `4π c²` for the far field `φ ≈ c/r`.
    pub growth_expected: f64,
    /// `‖⟨r⟩^{-3/4} φ‖²_{L²(r<R)}` at `R = R_max/4`, `R_max/2` and `R_max`.
    pub weighted_sq: [f64; 3],
    /// Ratio of successive dyadic increments of `weighted_sq`; below 1 for a
    /// convergent weighted norm (`2^{-1/2}` for a `1/r` tail).
    pub weighted_increment_ratio: f64,
    /// `⟨φ, Y⟩`.
    pub y_overlap: f64,
}

/// Diagnostics for a zero-energy solution that is not square integrable.
pub fn verify_zero_resonance(
    v: &PotentialProfile,
    resonance: &RadialFunction,
    dec: &SpectralDecomposition,
    tol: f64,
) -> Result<ResonanceReport> {
    let grid = dec.grid();
    let h = grid.require_uniform()?;
    let u = resonance.re();
    let d2 = second_derivative4(u, h);
    let cut = grid.r_max() - 4.0 * h;
    let mut res = 0.0;
    for i in 0..grid.len() {
        if grid.r()[i] > cut {
            break;
        }
        let e = -d2[i] + v.values()[i] * u[i];
        res += grid.w()[i] * e * e;
    }
    let residual = res.sqrt();
    if residual > tol {
        return Err(Error::Residual { what: "zero resonance", residual, tol });
    }

    // partial L² masses on nested balls
    let mut radii = Vec::new();
    let mut mass = Vec::new();
    let mut acc = 0.0;
    let mut next = 10.0;
    for i in 0..grid.len() {
        acc += grid.w()[i] * u[i] * u[i];
        let r = grid.r()[i];
        if r >= next - 1e-12 && r <= 40.0 + 1e-12 {
            radii.push(r);
            mass.push(acc);
            next += 1.0;
        }
    }
    let (growth_slope, _, growth_r2) = if radii.len() >= 3 {
        linear_fit(&radii, &mass)
    } else {
        (f64::NAN, 0.0, 0.0)
    };
    // far-field amplitude read off the last node: u → √(4π)·c
    let far = u[grid.len() - 1];
    let growth_expected = far * far;

    let weighted = |r_cut: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..grid.len() {
            let r = grid.r()[i];
            if r > r_cut {
                break;
            }
            s += grid.w()[i] * u[i] * u[i] * (1.0 + r * r).powf(-0.75);
        }
        s
    };
    let rm = grid.r_max();
    let weighted_sq = [weighted(0.25 * rm), weighted(0.5 * rm), weighted(rm)];

    Ok(ResonanceReport {
        residual,
        growth_slope,
        growth_r2,
        growth_expected,
        weighted_sq,
        weighted_increment_ratio: (weighted_sq[2] - weighted_sq[1]) / (weighted_sq[1] - weighted_sq[0]),
        y_overlap: dec.eigen_coeff(u),
    })
}

/// `κ(a)²` recomputed on a fresh uniform grid.
pub fn kappa_sq_for(a: f64, r_max: f64, n: usize) -> Result<f64> {
    let grid = make_grid(r_max, n, crate::grid::GridScheme::Uniform)?;
    let v = PotentialProfile::new(crate::soliton::PotentialKind::Soliton { a }, &grid);
    Ok(solve_eigen(&v, &grid)?.kappa_sq_shooting)
}
