//! Quadrature rules and exact exponential moments for Filon-type integration.

use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Simpson weights for `n` equispaced samples with spacing `h`.
/// An odd number of intervals closes with the 3/8 rule on the last three.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => return w,
        2 => {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
            return w;
        }
        3 => {
            w[0] = h / 3.0;
            w[1] = 4.0 * h / 3.0;
            w[2] = h / 3.0;
            return w;
        }
        _ => {}
    }
    let intervals = n - 1;
    let simpson_end = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    for i in (0..simpson_end).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if simpson_end < intervals {
        let s = simpson_end;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

/// Trapezoid weights on an arbitrary increasing abscissa.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let d = 0.5 * (x[i] - x[i - 1]);
        w[i - 1] += d;
        w[i] += d;
    }
    w
}

/// Moments `∫_0^len σ^k e^{iωσ} dσ` for k = 0..=N-1.
pub fn exp_moments<const N: usize>(omega: f64, len: f64) -> [Complex64; N] {
    let mut mu = [Complex64::new(0.0, 0.0); N];
    let theta = omega * len;
    if theta.abs() <= 2.0 {
        // power series in iω; 40 terms resolve |θ| ≤ 2 to machine precision
        for (k, m) in mu.iter_mut().enumerate() {
            let mut term = Complex64::new(len.powi(k as i32 + 1), 0.0);
            let mut acc = term / (k as f64 + 1.0);
            for j in 1..40 {
                term *= Complex64::new(0.0, theta) / j as f64;
                acc += term / (k + j + 1) as f64;
            }
            *m = acc;
        }
    } else {
        let e = Complex64::new(0.0, theta).exp();
        let inv = Complex64::new(0.0, -1.0 / omega);
        mu[0] = (e - 1.0) * inv;
        for k in 1..N {
            mu[k] = (e * len.powi(k as i32) - k as f64 * mu[k - 1]) * inv;
        }
    }
    mu
}

/// Weights `(w0, w1)` with `∫_0^d e^{iωσ} g(σ) dσ ≈ w0 g(0) + w1 g(d)` for linear `g`.
pub fn filon_linear(omega: f64, d: f64) -> (Complex64, Complex64) {
    let [m0, m1] = exp_moments::<2>(omega, d);
    let w1 = m1 / d;
    (m0 - w1, w1)
}

const LAGRANGE_CUBIC: [[f64; 4]; 4] = [
    [1.0, -11.0 / 6.0, 1.0, -1.0 / 6.0],
    [0.0, 3.0, -2.5, 0.5],
    [0.0, -1.5, 2.0, -0.5],
    [0.0, 1.0 / 3.0, -0.5, 1.0 / 6.0],
];

/// Weights for `∫_0^{3Δ} e^{iωσ} g(σ) dσ` with `g` the cubic interpolant through
/// the samples at σ = 0, Δ, 2Δ, 3Δ.
pub fn filon_cubic(omega: f64, delta: f64) -> [Complex64; 4] {
    let nu = exp_moments::<4>(omega * delta, 3.0);
    let mut w = [Complex64::new(0.0, 0.0); 4];
    for (j, row) in LAGRANGE_CUBIC.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, m) in row.iter().zip(nu.iter()) {
            acc += *m * *c;
        }
        w[j] = acc * delta;
    }
    w
}

/// Least-squares line `y = intercept + slope·x`; returns (slope, intercept, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}
