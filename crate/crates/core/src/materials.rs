//! Constitutive thermodynamics: per-phase free energies ψ_i(θ) with analytic
//! derivatives, heat conductivities d_i(θ), the optional kinetic-undercooling
//! coefficient γ(θ), and constant surface tension σ.
//!
//! Derived quantities follow the usual conventions: entropy η = -ψ′, internal
//! energy ε = ψ + θη, heat capacity κ = -θψ″ = ε′, latent heat
//! l(θ) = θ[[ψ′(θ)]] with the jump [[v]] = v₂ - v₁ across the interface.
//!
//! Laws are supplied either as a named family or as user closures with
//! analytic derivatives; no numerical differentiation happens inside operator
//! assembly.

use std::sync::Arc;

use thiserror::Error;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("temperature must be positive, got {0}")]
    NonpositiveTemperature(f64),
    #[error("material invariant violated: {0}")]
    Invariant(String),
    #[error("no melting temperature: {0}")]
    MeltingNotFound(String),
}

/// Free energy of one phase with analytic first and second derivatives.
#[derive(Clone)]
pub struct FreeEnergy {
    pub f: ScalarFn,
    pub df: ScalarFn,
    pub d2f: ScalarFn,
}

/// A positive coefficient of temperature with analytic first derivative.
#[derive(Clone)]
pub struct Coefficient {
    pub f: ScalarFn,
    pub df: ScalarFn,
}

impl Coefficient {
    pub fn constant(c: f64) -> Self {
        Coefficient {
            f: Arc::new(move |_| c),
            df: Arc::new(|_| 0.0),
        }
    }

    /// Power law c·θ^q.
    pub fn power(c: f64, q: f64) -> Self {
        Coefficient {
            f: Arc::new(move |t: f64| c * t.powf(q)),
            df: Arc::new(move |t: f64| c * q * t.powf(q - 1.0)),
        }
    }
}

/// Quantities derived from the free energy at one temperature and phase.
#[derive(Clone, Copy, Debug)]
pub struct Derived {
    pub kappa: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub d: f64,
}

#[derive(Clone)]
pub struct MaterialLaws {
    psi: [FreeEnergy; 2],
    d: [Coefficient; 2],
    gamma: Option<Coefficient>,
    pub sigma: f64,
    pub theta_range: (f64, f64),
}

/// Phase index: 0 is the inner phase Ω₁, 1 the outer phase Ω₂.
pub type Phase = usize;

impl MaterialLaws {
    /// Assemble laws from parts, validating positivity invariants on a
    /// 1024-point sample of the working temperature range.
    pub fn from_parts(
        psi: [FreeEnergy; 2],
        d: [Coefficient; 2],
        gamma: Option<Coefficient>,
        sigma: f64,
        theta_range: (f64, f64),
    ) -> Result<Self, MaterialError> {
        if sigma <= 0.0 {
            return Err(MaterialError::Invariant(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !(theta_range.0 > 0.0 && theta_range.1 > theta_range.0) {
            return Err(MaterialError::Invariant(format!(
                "working range must satisfy 0 < lo < hi, got {theta_range:?}"
            )));
        }
        let laws = MaterialLaws {
            psi,
            d,
            gamma,
            sigma,
            theta_range,
        };
        laws.validate_range()?;
        Ok(laws)
    }

    fn validate_range(&self) -> Result<(), MaterialError> {
        let (lo, hi) = self.theta_range;
        let n = 1024;
        for k in 0..=n {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            for phase in 0..2 {
                let kap = -t * (self.psi[phase].d2f)(t);
                if !(kap > 0.0) {
                    return Err(MaterialError::Invariant(format!(
                        "kappa_{} ({kap:.3e}) not positive at theta = {t:.6}",
                        phase + 1
                    )));
                }
                let dv = (self.d[phase].f)(t);
                if !(dv > 0.0) {
                    return Err(MaterialError::Invariant(format!(
                        "d_{} ({dv:.3e}) not positive at theta = {t:.6}",
                        phase + 1
                    )));
                }
            }
            if let Some(g) = &self.gamma {
                let gv = (g.f)(t);
                if !(gv > 0.0) {
                    return Err(MaterialError::Invariant(format!(
                        "gamma ({gv:.3e}) not positive at theta = {t:.6}; use gamma = None for the \
                         zero-undercooling regime"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The normalized family ψ_i(θ) = κ_i(θ - θ·ln θ) + A_iθ + B_i, with A, B
    /// fixed so that [[ψ(θ_m)]] = 0 and l(θ_m) = l_m. Heat capacities come out
    /// exactly constant: -θψ_i″ = κ_i.
    #[allow(clippy::too_many_arguments)]
    pub fn default_laws(
        kappa: [f64; 2],
        l_m: f64,
        theta_m: f64,
        d: [Coefficient; 2],
        sigma: f64,
        gamma: Option<Coefficient>,
        theta_range: (f64, f64),
    ) -> Result<Self, MaterialError> {
        if !(kappa[0] > 0.0 && kappa[1] > 0.0 && l_m > 0.0 && theta_m > 0.0) {
            return Err(MaterialError::Invariant(format!(
                "default laws need kappa_i, l_m, theta_m > 0 (kappa={kappa:?}, l_m={l_m}, theta_m={theta_m})"
            )));
        }
        let djump = kappa[1] - kappa[0];
        let a_jump = l_m / theta_m + djump * theta_m.ln();
        let b_jump = -djump * (theta_m - theta_m * theta_m.ln()) - a_jump * theta_m;
        let mk_psi = |kap: f64, a: f64, b: f64| FreeEnergy {
            f: Arc::new(move |t: f64| kap * (t - t * t.ln()) + a * t + b),
            df: Arc::new(move |t: f64| -kap * t.ln() + a),
            d2f: Arc::new(move |t: f64| -kap / t),
        };
        Self::from_parts(
            [mk_psi(kappa[0], 0.0, 0.0), mk_psi(kappa[1], a_jump, b_jump)],
            d,
            gamma,
            sigma,
            theta_range,
        )
    }

    pub fn gamma_is_zero(&self) -> bool {
        self.gamma.is_none()
    }

    pub fn psi(&self, theta: f64, phase: Phase) -> f64 {
        (self.psi[phase].f)(theta)
    }

    pub fn dpsi(&self, theta: f64, phase: Phase) -> f64 {
        (self.psi[phase].df)(theta)
    }

    /// [[ψ(θ)]] = ψ₂ - ψ₁.
    pub fn psi_jump(&self, theta: f64) -> f64 {
        self.psi(theta, 1) - self.psi(theta, 0)
    }

    /// [[ψ′(θ)]].
    pub fn dpsi_jump(&self, theta: f64) -> f64 {
        self.dpsi(theta, 1) - self.dpsi(theta, 0)
    }

    pub fn kappa(&self, theta: f64, phase: Phase) -> f64 {
        -theta * (self.psi[phase].d2f)(theta)
    }

    pub fn d(&self, theta: f64, phase: Phase) -> f64 {
        (self.d[phase].f)(theta)
    }

    pub fn d_prime(&self, theta: f64, phase: Phase) -> f64 {
        (self.d[phase].df)(theta)
    }

    /// γ(θ); zero in the γ ≡ 0 regime.
    pub fn gamma(&self, theta: f64) -> f64 {
        match &self.gamma {
            Some(g) => (g.f)(theta),
            None => 0.0,
        }
    }

    /// (κ, η, ε, d) at one temperature and phase, with κ = dε/dθ.
    pub fn derived(&self, theta: f64, phase: Phase) -> Result<Derived, MaterialError> {
        if theta <= 0.0 {
            return Err(MaterialError::NonpositiveTemperature(theta));
        }
        let eta = -(self.psi[phase].df)(theta);
        let epsilon = (self.psi[phase].f)(theta) + theta * eta;
        Ok(Derived {
            kappa: self.kappa(theta, phase),
            eta,
            epsilon,
            d: self.d(theta, phase),
        })
    }

    /// Latent heat l(θ) = θ[[ψ′(θ)]] = -θ[[η(θ)]].
    pub fn latent_heat(&self, theta: f64) -> Result<f64, MaterialError> {
        if theta <= 0.0 {
            return Err(MaterialError::NonpositiveTemperature(theta));
        }
        Ok(theta * self.dpsi_jump(theta))
    }

    /// The melting temperature, the root of [[ψ(θ_m)]] = 0 inside `bracket`,
    /// by safeguarded Newton iteration (bisection fallback).
    pub fn melting_temperature(&self, bracket: (f64, f64)) -> Result<f64, MaterialError> {
        let f = |t: f64| self.psi_jump(t);
        let fp = |t: f64| self.dpsi_jump(t);
        solve_bracketed(f, fp, bracket, 1e-12).map_err(MaterialError::MeltingNotFound)
    }

    /// Interface temperature of the equilibrium circle of radius `r0`: the
    /// root of [[ψ(θ)]] = σ/r0 (Gibbs–Thomson with ℋ = -1/r0, V = 0).
    pub fn equilibrium_temperature(&self, r0: f64) -> Result<f64, MaterialError> {
        let target = self.sigma / r0;
        let f = |t: f64| self.psi_jump(t) - target;
        let fp = |t: f64| self.dpsi_jump(t);
        solve_bracketed(f, fp, self.theta_range, 1e-14)
            .map_err(|m| MaterialError::MeltingNotFound(format!("equilibrium temperature: {m}")))
    }
}

/// Newton with bisection safeguard on a sign-change bracket.
fn solve_bracketed(
    f: impl Fn(f64) -> f64,
    fp: impl Fn(f64) -> f64,
    (mut lo, mut hi): (f64, f64),
    rel_tol: f64,
) -> Result<f64, String> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(format!(
            "no sign change on bracket [{lo}, {hi}]: f(lo) = {flo:.3e}, f(hi) = {fhi:.3e}"
        ));
    }
    let mut neg_lo = flo < 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() <= rel_tol * x.abs().max(1.0) * fp(x).abs().max(1e-30)
            || hi - lo < rel_tol * x.abs().max(1e-30)
        {
            return Ok(x);
        }
        if (fx < 0.0) == neg_lo {
            lo = x;
        } else {
            hi = x;
        }
        neg_lo = f(lo) < 0.0;
        let dfx = fp(x);
        let newton = if dfx != 0.0 { x - fx / dfx } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}
