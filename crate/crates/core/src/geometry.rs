//! Fixed reference geometry: the annulus Ω = {R_in < |z| < R_out}, the
//! reference circle Σ of radius R0, tubular coordinates (metric projection and
//! signed distance), and the C^∞ cutoff/bump profiles used by the fixed-domain
//! transform and the translation probes.
//!
//! The specialization is m = 1: Σ is a circle, so projection and signed
//! distance are exact in polar coordinates, and the inner phase Ω₁ is
//! {|z| < R0} (signed distance negative there).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("chart invariant violated: {0}")]
    Invariant(String),
    #[error("point at radius {rho:.6} outside annulus ({r_in:.6}, {r_out:.6})")]
    OutsideAnnulus { rho: f64, r_in: f64, r_out: f64 },
    #[error("degenerate radius: r = {r:.6} <= -R0 = {neg_r0:.6}")]
    DegenerateRadius { r: f64, neg_r0: f64 },
}

/// The fixed annular domain with its reference circle and tubular band.
///
/// `a` is the tubular half-width: the transform's cutoff is supported in
/// |d_Σ| < 2a/3 and is identically 1 for |d_Σ| < a/3.
#[derive(Clone, Debug)]
pub struct TubularChart {
    pub r0: f64,
    pub a: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub n_s: usize,
    pub n_r1: usize,
    pub n_r2: usize,
}

impl TubularChart {
    pub fn new(
        r0: f64,
        a: f64,
        r_in: f64,
        r_out: f64,
        n_s: usize,
        n_r1: usize,
        n_r2: usize,
    ) -> Result<Self, GeometryError> {
        let fail = |msg: String| Err(GeometryError::Invariant(msg));
        if !(r0 > 0.0 && a > 0.0) {
            return fail(format!("R0 and a must be positive (R0={r0}, a={a})"));
        }
        if a >= r0 {
            return fail(format!(
                "a < R0 required for an injective tubular map (a={a}, R0={r0})"
            ));
        }
        if !(r_in > 0.0 && r_in < r0 - a) {
            return fail(format!(
                "0 < R_in < R0 - a required (R_in={r_in}, R0-a={})",
                r0 - a
            ));
        }
        if r_out <= r0 + a {
            return fail(format!(
                "R_out > R0 + a required (R_out={r_out}, R0+a={})",
                r0 + a
            ));
        }
        if n_s % 2 != 0 || n_s < 16 {
            return fail(format!("N_s must be even and >= 16 (got {n_s})"));
        }
        if n_r1 < 8 || n_r2 < 8 {
            return fail(format!("N_r1, N_r2 must be >= 8 (got {n_r1}, {n_r2})"));
        }
        Ok(TubularChart {
            r0,
            a,
            r_in,
            r_out,
            n_s,
            n_r1,
            n_r2,
        })
    }

    /// Chart with the default proportions a = R0/2, R_in = R0/4, R_out = 2·R0.
    pub fn with_defaults(
        r0: f64,
        n_s: usize,
        n_r1: usize,
        n_r2: usize,
    ) -> Result<Self, GeometryError> {
        TubularChart::new(r0, r0 / 2.0, r0 / 4.0, 2.0 * r0, n_s, n_r1, n_r2)
    }

    /// Metric projection onto Σ and signed distance: `z ↦ (Π(z), d_Σ(z))`.
    /// The angle is in [0, 2π); the signed distance is negative inside Ω₁.
    pub fn project_and_distance(&self, z: [f64; 2]) -> Result<(f64, f64), GeometryError> {
        let rho = (z[0] * z[0] + z[1] * z[1]).sqrt();
        if rho <= self.r_in || rho >= self.r_out {
            return Err(GeometryError::OutsideAnnulus {
                rho,
                r_in: self.r_in,
                r_out: self.r_out,
            });
        }
        let mut s = z[1].atan2(z[0]);
        if s < 0.0 {
            s += 2.0 * std::f64::consts::PI;
        }
        Ok((s, rho - self.r0))
    }

    /// The tubular map `Λ(p, r) = p + r ν_Σ(p)`, valid for any r > -R0.
    pub fn extend(&self, s: f64, r: f64) -> Result<[f64; 2], GeometryError> {
        if r <= -self.r0 {
            return Err(GeometryError::DegenerateRadius {
                r,
                neg_r0: -self.r0,
            });
        }
        let rho = self.r0 + r;
        Ok([rho * s.cos(), rho * s.sin()])
    }

    /// Whether a signed distance lies inside the tubular band |r| < a.
    pub fn in_tube(&self, r: f64) -> bool {
        r.abs() < self.a
    }

    /// The transform cutoff ζ: support (-2a/3, 2a/3), plateau (-a/3, a/3).
    pub fn zeta(&self) -> CutoffProfile {
        CutoffProfile::zeta(self.a)
    }
}

/// Plain C^∞ bump e(x) = exp(-1/x) for x > 0, else 0.
fn bump_e(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

fn bump_e_deriv(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp() / (x * x)
    } else {
        0.0
    }
}

/// Smoothstep S(t) = e(t) / (e(t) + e(1-t)): 0 for t ≤ 0, 1 for t ≥ 1,
/// strictly increasing in between, C^∞ everywhere.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let e0 = bump_e(t);
        let e1 = bump_e(1.0 - t);
        e0 / (e0 + e1)
    }
}

pub fn smoothstep_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let e0 = bump_e(t);
        let e1 = bump_e(1.0 - t);
        let d0 = bump_e_deriv(t);
        let d1 = bump_e_deriv(1.0 - t);
        (d0 * e1 + e0 * d1) / ((e0 + e1) * (e0 + e1))
    }
}

/// Which of the named bump profiles a `CutoffProfile` instantiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutoffKind {
    /// ζ: the transform cutoff in signed distance.
    Zeta,
    /// χ_m: horizontal bump of the localized translation.
    ChiM,
    /// χ: vertical bump of the localized translation.
    Chi,
    /// ϖ: wide vertical plateau of the horizontal translation.
    Varpi,
    /// ξ: temporal bump of the localized time shift.
    XiTime,
    /// ς: envelope bump with caller-specified widths.
    Varsigma,
}

/// A C^∞ profile that is 1 on |x - center| ≤ plateau, 0 for
/// |x - center| ≥ support, built from the smoothstep ramp.
#[derive(Clone, Debug)]
pub struct CutoffProfile {
    pub kind: CutoffKind,
    pub center: f64,
    pub plateau: f64,
    pub support: f64,
}

impl CutoffProfile {
    fn build(kind: CutoffKind, center: f64, plateau: f64, support: f64) -> Self {
        assert!(
            plateau > 0.0 && support > plateau,
            "cutoff widths must nest: 0 < plateau < support"
        );
        CutoffProfile {
            kind,
            center,
            plateau,
            support,
        }
    }

    /// ζ(r): 1 on (-a/3, a/3), supported in (-2a/3, 2a/3).
    pub fn zeta(a: f64) -> Self {
        Self::build(CutoffKind::Zeta, 0.0, a / 3.0, 2.0 * a / 3.0)
    }

    /// ϖ(y): 1 on (-2a/3, 2a/3), supported in (-13a/18, 13a/18).
    pub fn varpi(a: f64) -> Self {
        Self::build(CutoffKind::Varpi, 0.0, 2.0 * a / 3.0, 13.0 * a / 18.0)
    }

    /// χ_m(x): 1 on B(x_c, ε₀), supported in B(x_c, 2ε₀).
    pub fn chi_m(x_c: f64, eps0: f64) -> Self {
        Self::build(CutoffKind::ChiM, x_c, eps0, 2.0 * eps0)
    }

    /// χ(y): 1 on B(y_c, ε₀), supported in B(y_c, 2ε₀).
    pub fn chi(y_c: f64, eps0: f64) -> Self {
        Self::build(CutoffKind::Chi, y_c, eps0, 2.0 * eps0)
    }

    /// ξ(t): 1 on B(t_c, ε₀), supported in B(t_c, 2ε₀).
    pub fn xi_time(t_c: f64, eps0: f64) -> Self {
        Self::build(CutoffKind::XiTime, t_c, eps0, 2.0 * eps0)
    }

    /// ς: envelope with explicit plateau/support half-widths.
    pub fn varsigma(center: f64, plateau: f64, support: f64) -> Self {
        Self::build(CutoffKind::Varsigma, center, plateau, support)
    }

    pub fn value(&self, x: f64) -> f64 {
        let u = (self.support - (x - self.center).abs()) / (self.support - self.plateau);
        smoothstep(u)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let d = x - self.center;
        let u = (self.support - d.abs()) / (self.support - self.plateau);
        -smoothstep_deriv(u) * d.signum() / (self.support - self.plateau)
    }
}
