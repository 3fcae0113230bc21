//! Trigonometric (spectral) differentiation and the surface heat semigroup on
//! uniformly sampled periodic data. Grids here are small (N ≲ 512), so a
//! direct DFT with a precomputed twiddle table is used; it is exact for
//! band-limited data up to rounding, which the curvature and semigroup tests
//! rely on.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("semigroup time must be nonnegative, got {0}")]
    NegativeTime(f64),
}

struct Twiddle {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Twiddle {
    fn new(n: usize) -> Self {
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let cos = (0..n).map(|j| (step * j as f64).cos()).collect();
        let sin = (0..n).map(|j| (step * j as f64).sin()).collect();
        Twiddle { cos, sin }
    }
}

fn table(n: usize) -> Arc<Twiddle> {
    static TABLES: OnceLock<Mutex<HashMap<usize, Arc<Twiddle>>>> = OnceLock::new();
    let m = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = m.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(Twiddle::new(n)))
        .clone()
}

/// Signed Fourier mode for bin `j` of an `n`-point transform:
/// `0, 1, …, n/2, -(n/2 - 1), …, -1`.
pub fn mode(j: usize, n: usize) -> i64 {
    let j = j as i64;
    let n = n as i64;
    if j <= n / 2 {
        j
    } else {
        j - n
    }
}

/// Forward DFT of real samples: `X_k = Σ_j x_j e^{-2πi jk/n}`.
pub fn forward(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    let tw = table(n);
    let mut out = vec![(0.0, 0.0); n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, &v) in x.iter().enumerate() {
            let idx = (j * k) % n;
            re += v * tw.cos[idx];
            im -= v * tw.sin[idx];
        }
        *o = (re, im);
    }
    out
}

/// Inverse DFT keeping the real part: `x_j = (1/n) Σ_k X_k e^{+2πi jk/n}`.
pub fn inverse_real(spec: &[(f64, f64)]) -> Vec<f64> {
    let n = spec.len();
    let tw = table(n);
    let scale = 1.0 / n as f64;
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let mut re = 0.0;
        for (k, &(sr, si)) in spec.iter().enumerate() {
            let idx = (j * k) % n;
            re += sr * tw.cos[idx] - si * tw.sin[idx];
        }
        *o = re * scale;
    }
    out
}

/// Spectral derivative `d^m/ds^m` on the periodic unit circle `s ∈ [0, 2π)`.
/// The Nyquist mode is zeroed for odd orders (its derivative is not
/// representable on the grid).
pub fn derivative(x: &[f64], order: u32) -> Vec<f64> {
    let n = x.len();
    let mut spec = forward(x);
    for (j, s) in spec.iter_mut().enumerate() {
        let k = mode(j, n);
        if order % 2 == 1 && 2 * j == n {
            *s = (0.0, 0.0);
            continue;
        }
        let (re, im) = *s;
        let kf = k as f64;
        // multiply by (ik)^order
        let (mut r, mut i) = (re, im);
        for _ in 0..order {
            let (nr, ni) = (-kf * i, kf * r);
            r = nr;
            i = ni;
        }
        *s = (r, i);
    }
    inverse_real(&spec)
}

/// Apply the heat semigroup `e^{t Δ_Σ}` on a circle of radius `r0`: Fourier
/// mode `k` is damped by `exp(-(k/r0)² t)`. Constant fields pass through
/// bit-identically (kernel of the Laplace–Beltrami operator).
pub fn semigroup(u0: &[f64], t: f64, r0: f64) -> Result<Vec<f64>, SpectralError> {
    if t < 0.0 {
        return Err(SpectralError::NegativeTime(t));
    }
    let n = u0.len();
    if t == 0.0 {
        return Ok(u0.to_vec());
    }
    let lo = u0.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    if hi - lo <= 1e-15 * scale {
        // s-constant input: exact kernel, and keeps downstream factorization
        // caches valid bit-for-bit
        return Ok(u0.to_vec());
    }
    let mut spec = forward(u0);
    for (j, s) in spec.iter_mut().enumerate() {
        let k = mode(j, n) as f64;
        let damp = (-(k / r0) * (k / r0) * t).exp();
        s.0 *= damp;
        s.1 *= damp;
    }
    Ok(inverse_real(&spec))
}
