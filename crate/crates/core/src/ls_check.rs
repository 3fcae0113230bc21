//! Frozen-coefficient Lopatinskii–Shapiro solvability scanner for the
//! half-space model problem behind the principal linearization: bulk
//! parabolic operator κ₀∂_t - P:∇², Gibbs–Thomson row l₂v - S(ξ)δ, and the
//! Stefan row coupling l₀∂_tδ to the one-sided flux.
//!
//! `ls_determinant` evaluates the displayed boundary-symbol bracket
//! iS(ξ)a₀·ξ + S(ξ)μd₀ - l₂l₀λ with the stable root μ. The scanner certifies
//! solvability with the decaying-mode composition of the same rows (the bulk
//! mode is e^{-μy} on y > 0, so ∂_y at the boundary contributes -μ and the
//! outward normal flips it back): D = l₂l₀λ + iS(ξ)a₀·ξ + S(ξ)d₀μ for the
//! full system, plus its three high-frequency limit variants. A healthy
//! coefficient set keeps every variant's determinant away from zero on the
//! closed right half-plane; flipping the sign of l₂l₀ plants a root on the
//! positive real λ-axis, which the scanner locates by 1-D refinement.
//!
//! The reported certificate is the normalized modulus |D| / Σ|terms| ∈ [0, 1]
//! (a relative non-cancellation measure): raw |D| tends to 0 as
//! (ξ, λ) → (0, 0) for any coefficients, so a raw grid minimum would say
//! nothing. The raw modulus at the arg-min is reported alongside.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LsError {
    #[error("coefficient invariant violated: {0}")]
    Invariant(String),
    #[error("symbol undefined at xi = 0, lambda = 0")]
    OriginExcluded,
}

/// Minimal complex arithmetic for the symbol algebra.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C64 {
    pub re: f64,
    pub im: f64,
}

impl C64 {
    pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        C64 { re, im }
    }

    pub fn add(self, o: C64) -> C64 {
        C64::new(self.re + o.re, self.im + o.im)
    }

    pub fn sub(self, o: C64) -> C64 {
        C64::new(self.re - o.re, self.im - o.im)
    }

    pub fn mul(self, o: C64) -> C64 {
        C64::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }

    pub fn scale(self, s: f64) -> C64 {
        C64::new(self.re * s, self.im * s)
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Principal square root (branch cut on the negative real axis).
    pub fn sqrt(self) -> C64 {
        let r = self.abs();
        if r == 0.0 {
            return C64::ZERO;
        }
        let re = ((r + self.re) / 2.0).sqrt();
        let im_mag = ((r - self.re) / 2.0).sqrt();
        C64::new(re, if self.im >= 0.0 { im_mag } else { -im_mag })
    }
}

/// Frozen coefficients of the model problem in m tangential dimensions.
#[derive(Clone, Debug)]
pub struct FrozenCoefficients {
    pub m: usize,
    /// (m+1)×(m+1) symmetric positive definite, row-major.
    pub p: Vec<f64>,
    /// m×m symmetric positive definite, row-major.
    pub s: Vec<f64>,
    pub a0: Vec<f64>,
    pub kappa0: f64,
    pub d0: f64,
    pub l0: f64,
    pub l2: f64,
}

fn is_spd(a: &[f64], n: usize) -> bool {
    // Cholesky attempt
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            if (a[i * n + j] - a[j * n + i]).abs() > 1e-12 * (1.0 + a[i * n + j].abs()) {
                return false;
            }
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    true
}

impl FrozenCoefficients {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: usize,
        p: Vec<f64>,
        s: Vec<f64>,
        a0: Vec<f64>,
        kappa0: f64,
        d0: f64,
        l0: f64,
        l2: f64,
    ) -> Result<Self, LsError> {
        if p.len() != (m + 1) * (m + 1) || s.len() != m * m || a0.len() != m {
            return Err(LsError::Invariant(format!(
                "dimension mismatch for m = {m}: |P| = {}, |S| = {}, |a0| = {}",
                p.len(),
                s.len(),
                a0.len()
            )));
        }
        if !is_spd(&p, m + 1) {
            return Err(LsError::Invariant(
                "P must be symmetric positive definite".into(),
            ));
        }
        if !is_spd(&s, m) {
            return Err(LsError::Invariant(
                "S must be symmetric positive definite".into(),
            ));
        }
        if !(kappa0 > 0.0 && d0 > 0.0) {
            return Err(LsError::Invariant(format!(
                "kappa0, d0 must be positive ({kappa0}, {d0})"
            )));
        }
        if !(l2 * l0 > 0.0) {
            return Err(LsError::Invariant(format!(
                "l2*l0 must be positive, got {}",
                l2 * l0
            )));
        }
        Ok(FrozenCoefficients {
            m,
            p,
            s,
            a0,
            kappa0,
            d0,
            l0,
            l2,
        })
    }

    /// Test-only bypass of the invariants (e.g. a deliberate sign flip of
    /// l₂l₀ to plant a determinant root).
    #[doc(hidden)]
    #[allow(clippy::too_many_arguments)]
    pub fn new_unchecked(
        m: usize,
        p: Vec<f64>,
        s: Vec<f64>,
        a0: Vec<f64>,
        kappa0: f64,
        d0: f64,
        l0: f64,
        l2: f64,
    ) -> Self {
        FrozenCoefficients {
            m,
            p,
            s,
            a0,
            kappa0,
            d0,
            l0,
            l2,
        }
    }

    /// All-ones isotropic defaults: P = I, S = I, a₀ = 0, κ₀ = d₀ = l₀ = l₂ = 1.
    pub fn isotropic_default(m: usize) -> Self {
        let mut p = vec![0.0; (m + 1) * (m + 1)];
        for i in 0..=m {
            p[i * (m + 1) + i] = 1.0;
        }
        let mut s = vec![0.0; m * m];
        for i in 0..m {
            s[i * m + i] = 1.0;
        }
        FrozenCoefficients {
            m,
            p,
            s,
            a0: vec![0.0; m],
            kappa0: 1.0,
            d0: 1.0,
            l0: 1.0,
            l2: 1.0,
        }
    }

    /// P(ξ) = ξᵉᵀ P ξᵉ with ξᵉ = (ξ, 0).
    pub fn p_of(&self, xi: &[f64]) -> f64 {
        let n = self.m + 1;
        let mut acc = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                acc += xi[i] * self.p[i * n + j] * xi[j];
            }
        }
        acc
    }

    /// S(ξ) = ξᵀ S ξ.
    pub fn s_of(&self, xi: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                acc += xi[i] * self.s[i * self.m + j] * xi[j];
            }
        }
        acc
    }

    /// P_{m+1} := P_{m+1,m+1} (normal-normal entry).
    pub fn p_normal(&self) -> f64 {
        let n = self.m + 1;
        self.p[(n - 1) * n + (n - 1)]
    }

    /// P_m·ξ with P_m the normal-tangential row of P.
    pub fn p_mix(&self, xi: &[f64]) -> f64 {
        let n = self.m + 1;
        (0..self.m).map(|j| self.p[(n - 1) * n + j] * xi[j]).sum()
    }

    pub fn a0_dot(&self, xi: &[f64]) -> f64 {
        self.a0.iter().zip(xi).map(|(a, x)| a * x).sum()
    }
}

/// The stable root μ = (√(-(P_m·ξ)² + P_{m+1}κ₀λ + P_{m+1}P(ξ)) + iP_m·ξ)/P_{m+1}.
/// Re μ > 0 away from (ξ, λ) = (0, 0) on the closed right half-plane, so the
/// bulk mode e^{-μy} decays on y > 0.
pub fn stable_root(c: &FrozenCoefficients, xi: &[f64], lambda: C64) -> Result<C64, LsError> {
    let xi_norm: f64 = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if xi_norm == 0.0 && lambda.abs() == 0.0 {
        return Err(LsError::OriginExcluded);
    }
    let pm_xi = c.p_mix(xi);
    let pn = c.p_normal();
    let radicand = C64::new(-pm_xi * pm_xi + pn * c.p_of(xi), 0.0).add(lambda.scale(pn * c.kappa0));
    Ok(radicand.sqrt().add(C64::new(0.0, pm_xi)).scale(1.0 / pn))
}

/// The displayed boundary-symbol bracket: iS(ξ)a₀·ξ + S(ξ)μd₀ - l₂l₀λ.
pub fn ls_determinant(c: &FrozenCoefficients, xi: &[f64], lambda: C64) -> Result<C64, LsError> {
    let mu = stable_root(c, xi, lambda)?;
    let s = c.s_of(xi);
    Ok(C64::new(0.0, s * c.a0_dot(xi))
        .add(mu.scale(s * c.d0))
        .sub(lambda.scale(c.l2 * c.l0)))
}

/// Which of the four solvability systems a determinant sample belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Full system: bulk mode + Gibbs–Thomson row + Stefan row.
    Ls,
    /// High-frequency limit 1: Stefan row without the l₀λδ term.
    Asym1,
    /// High-frequency limit 2: bulk operator without tangential terms,
    /// full Stefan row; |ξ| = 1.
    Asym2,
    /// High-frequency limit 3: pure-flux row d₀∂_y v(0) = 0; |ξ| = 1.
    Asym3,
}

pub const ALL_VARIANTS: [Variant; 4] =
    [Variant::Ls, Variant::Asym1, Variant::Asym2, Variant::Asym3];

/// Decaying-mode solvability determinant of one variant, together with the
/// sum of its term moduli (the normalization weight).
pub fn variant_determinant(
    c: &FrozenCoefficients,
    variant: Variant,
    xi: &[f64],
    lambda: C64,
) -> Result<(C64, f64), LsError> {
    let s = c.s_of(xi);
    match variant {
        Variant::Ls => {
            let mu = stable_root(c, xi, lambda)?;
            let t1 = lambda.scale(c.l2 * c.l0);
            let t2 = C64::new(0.0, s * c.a0_dot(xi));
            let t3 = mu.scale(s * c.d0);
            Ok((t1.add(t2).add(t3), t1.abs() + t2.abs() + t3.abs()))
        }
        Variant::Asym1 => {
            let mu = stable_root(c, xi, lambda)?;
            let t1 = C64::new(0.0, s * c.a0_dot(xi));
            let t2 = mu.scale(s * c.d0);
            Ok((t1.add(t2), t1.abs() + t2.abs()))
        }
        Variant::Asym2 => {
            // bulk mode of κ₀λ - P_{m+1}∂²_y: μ₂ = sqrt(κ₀λ/P_{m+1})
            let mu2 = lambda.scale(c.kappa0 / c.p_normal()).sqrt();
            let t1 = lambda.scale(c.l2 * c.l0);
            let t2 = mu2.scale(s * c.d0);
            Ok((t1.add(t2), t1.abs() + t2.abs()))
        }
        Variant::Asym3 => {
            let mu2 = lambda.scale(c.kappa0 / c.p_normal()).sqrt();
            let t = mu2.scale(s * c.d0);
            Ok((t, t.abs().max(1e-300)))
        }
    }
}

/// Scan grid: ξ spheres × directions, λ moduli (log-spaced) × phases in
/// [-π/2, π/2] (covering the imaginary axis at the endpoints).
#[derive(Clone, Debug)]
pub struct ScanGrid {
    pub xi_radii: Vec<f64>,
    pub n_directions: usize,
    pub lambda_moduli: Vec<f64>,
    pub n_phases: usize,
}

impl ScanGrid {
    /// Desk-scale defaults: |ξ| ∈ {0.5, 1, 2}, 64 directions, |λ| log-spaced
    /// over [1e-3, 1e3] with 61 samples, 41 phases.
    pub fn default_desk() -> Self {
        let lambda_moduli = (0..61)
            .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 60.0))
            .collect();
        ScanGrid {
            xi_radii: vec![0.5, 1.0, 2.0],
            n_directions: 64,
            lambda_moduli,
            n_phases: 41,
        }
    }

    /// Twice the resolution in every direction (grid-stability audits).
    pub fn refined(&self) -> Self {
        let n = self.lambda_moduli.len() * 2 - 1;
        let (lo, hi) = (self.lambda_moduli[0], *self.lambda_moduli.last().unwrap());
        let lambda_moduli = (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .collect();
        ScanGrid {
            xi_radii: self.xi_radii.clone(),
            n_directions: self.n_directions * 2,
            lambda_moduli,
            n_phases: self.n_phases * 2 - 1,
        }
    }

    fn directions(&self, m: usize) -> Vec<Vec<f64>> {
        if m == 1 {
            return vec![vec![1.0], vec![-1.0]];
        }
        if m == 2 {
            return (0..self.n_directions)
                .map(|k| {
                    let ang = 2.0 * std::f64::consts::PI * k as f64 / self.n_directions as f64;
                    vec![ang.cos(), ang.sin()]
                })
                .collect();
        }
        // higher m: deterministic pseudo-random directions
        let mut rng = crate::rng::SplitMix64::new(0x5ca1ab1e);
        (0..self.n_directions)
            .map(|_| {
                let mut v: Vec<f64> = (0..m).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
                v.iter_mut().for_each(|x| *x /= n);
                v
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct VariantResult {
    pub variant: Variant,
    /// Minimum of |D| / Σ|terms| over the variant's grid.
    pub min_normalized: f64,
    /// Raw |D| at that argmin.
    pub min_abs: f64,
    pub argmin_xi: Vec<f64>,
    pub argmin_lambda: C64,
}

#[derive(Clone, Debug)]
pub struct ScanReport {
    pub per_variant: Vec<VariantResult>,
    pub min_normalized: f64,
    pub min_abs: f64,
    /// Positive-real-axis root found by 1-D refinement when the scan detects
    /// a sign-flipped l₂l₀ (test-only coefficient sets): (λ, |D|, ξ).
    pub located_root: Option<(f64, f64, Vec<f64>)>,
    /// Smallest Re μ over the scan grid (decay margin of the bulk mode).
    pub min_re_mu: f64,
}

pub fn scan(c: &FrozenCoefficients, grid: &ScanGrid) -> Result<ScanReport, LsError> {
    let dirs = grid.directions(c.m);
    let mut per_variant = Vec::new();
    let mut min_re_mu = f64::INFINITY;
    for &variant in &ALL_VARIANTS {
        let radii: &[f64] = match variant {
            Variant::Ls | Variant::Asym1 => &grid.xi_radii,
            Variant::Asym2 | Variant::Asym3 => &[1.0],
        };
        let mut best = VariantResult {
            variant,
            min_normalized: f64::INFINITY,
            min_abs: f64::INFINITY,
            argmin_xi: vec![0.0; c.m],
            argmin_lambda: C64::ZERO,
        };
        for &rad in radii {
            for dir in &dirs {
                let xi: Vec<f64> = dir.iter().map(|d| d * rad).collect();
                for &lm in &grid.lambda_moduli {
                    for kp in 0..grid.n_phases {
                        let phase = -std::f64::consts::FRAC_PI_2
                            + std::f64::consts::PI * kp as f64 / (grid.n_phases - 1) as f64;
                        let lambda = C64::new(lm * phase.cos(), lm * phase.sin());
                        if variant == Variant::Ls {
                            let mu = stable_root(c, &xi, lambda)?;
                            min_re_mu = min_re_mu.min(mu.re);
                        }
                        let (d, w) = variant_determinant(c, variant, &xi, lambda)?;
                        let norm = d.abs() / w.max(1e-300);
                        if norm < best.min_normalized {
                            best.min_normalized = norm;
                            best.min_abs = d.abs();
                            best.argmin_xi = xi.clone();
                            best.argmin_lambda = lambda;
                        }
                    }
                }
            }
        }
        per_variant.push(best);
    }
    let min_normalized = per_variant
        .iter()
        .map(|v| v.min_normalized)
        .fold(f64::INFINITY, f64::min);
    let min_abs = per_variant
        .iter()
        .map(|v| v.min_abs)
        .fold(f64::INFINITY, f64::min);

    // sign-flipped l2*l0 plants a real root of the full-system determinant:
    // l2 l0 λ + S(ξ)d0 μ(λ) changes sign along the positive real axis
    let located_root = if c.l2 * c.l0 < 0.0 {
        locate_real_root(c, &dirs, &grid.xi_radii)
    } else {
        None
    };
    Ok(ScanReport {
        per_variant,
        min_normalized,
        min_abs,
        located_root,
        min_re_mu,
    })
}

fn locate_real_root(
    c: &FrozenCoefficients,
    dirs: &[Vec<f64>],
    radii: &[f64],
) -> Option<(f64, f64, Vec<f64>)> {
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &rad in radii {
        for dir in dirs {
            let xi: Vec<f64> = dir.iter().map(|d| d * rad).collect();
            let f = |t: f64| -> f64 {
                let (d, _) = variant_determinant(c, Variant::Ls, &xi, C64::new(t, 0.0)).unwrap();
                d.re
            };
            let mut prev_t = 1e-8;
            let mut prev_f = f(prev_t);
            let mut bracket = None;
            for k in 1..=400 {
                let t = 1e-8 * (1e14f64).powf(k as f64 / 400.0);
                let ft = f(t);
                if prev_f.signum() != ft.signum() {
                    bracket = Some((prev_t, t));
                    break;
                }
                prev_t = t;
                prev_f = ft;
            }
            let Some((mut lo, mut hi)) = bracket else {
                continue;
            };
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(lo).signum() == f(mid).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * hi.max(1.0) {
                    break;
                }
            }
            let t = 0.5 * (lo + hi);
            let (d, _) = variant_determinant(c, Variant::Ls, &xi, C64::new(t, 0.0)).ok()?;
            let abs = d.abs();
            if best.as_ref().map(|b| abs < b.1).unwrap_or(true) {
                best = Some((t, abs, xi.clone()));
            }
        }
    }
    best
}
