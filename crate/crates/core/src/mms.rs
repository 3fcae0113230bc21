//! Manufactured-solution harness: a closed-form space-time solution of the
//! transformed system with source terms injected into the bulk,
//! Gibbs–Thomson and Stefan rows, used to measure the scheme's temporal and
//! spatial convergence orders.
//!
//! The sources are evaluated pointwise from the closed forms (with a tiny
//! fixed-step stencil for the divergence of the exact flux), so they are
//! independent of the solver grid: any scheme defect shows up as a
//! convergence-floor, not as a cancellation.

use std::sync::Arc;

use crate::fields::{BulkField, Grid, HeightField};
use crate::geometry::CutoffProfile;
use crate::linalg::Mat2;
use crate::materials::{Coefficient, MaterialLaws};
use crate::stepper::{self, AdvanceOpts, Forcing, State, StepError, Stepper};

/// Closed-form exact fields with analytic derivatives, plus the material
/// laws the case runs with.
pub struct ManufacturedCase {
    pub laws: MaterialLaws,
    pub r0: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub theta_star: f64,
    amp: [f64; 2],
    ang_amp: f64,
    omega_theta: f64,
    h_amp: f64,
    h_mode: f64,
    omega_h: f64,
}

impl ManufacturedCase {
    /// Default case on the standard chart: kinetic undercooling on, constant
    /// conductivities, gently moving second-mode interface.
    pub fn standard() -> Self {
        let laws = MaterialLaws::default_laws(
            [1.0, 1.0],
            1.0,
            1.0,
            [Coefficient::constant(1.2), Coefficient::constant(0.8)],
            0.2,
            Some(Coefficient::constant(0.5)),
            (0.3, 3.0),
        )
        .unwrap();
        let theta_star = laws.equilibrium_temperature(1.0).unwrap();
        ManufacturedCase {
            laws,
            r0: 1.0,
            r_in: 0.25,
            r_out: 2.0,
            theta_star,
            amp: [0.15, -0.10],
            ang_amp: 0.3,
            omega_theta: 2.0,
            h_amp: 0.01,
            h_mode: 2.0,
            omega_h: 3.0,
        }
    }

    fn radial_profile(&self, phase: usize, rho: f64) -> (f64, f64, f64) {
        // cubic with zero slope at the wall, zero value and unit-order slope
        // at the interface: f(x) = x²(1 - x), derivatives w.r.t. rho
        if phase == 0 {
            let len = self.r0 - self.r_in;
            let x = (rho - self.r_in) / len;
            let f = x * x * (1.0 - x);
            let fp = (2.0 * x - 3.0 * x * x) / len;
            let fpp = (2.0 - 6.0 * x) / (len * len);
            (f, fp, fpp)
        } else {
            let len = self.r_out - self.r0;
            let y = (self.r_out - rho) / len;
            let f = y * y * (1.0 - y);
            let fp = -(2.0 * y - 3.0 * y * y) / len;
            let fpp = (2.0 - 6.0 * y) / (len * len);
            (f, fp, fpp)
        }
    }

    fn angular(&self, t: f64, s: f64) -> (f64, f64, f64, f64) {
        // g(t, s) = 1 + c cos(s) cos(ωt): (g, g_s, g_ss, g_t)
        let c = self.ang_amp;
        let w = self.omega_theta;
        (
            1.0 + c * s.cos() * (w * t).cos(),
            -c * s.sin() * (w * t).cos(),
            -c * s.cos() * (w * t).cos(),
            -c * w * s.cos() * (w * t).sin(),
        )
    }

    fn phase_of(&self, rho: f64) -> usize {
        if rho < self.r0 {
            0
        } else {
            1
        }
    }

    pub fn theta_exact(&self, t: f64, rho: f64, s: f64) -> f64 {
        let phase = self.phase_of(rho);
        let (f, _, _) = self.radial_profile(phase, rho);
        let (g, _, _, _) = self.angular(t, s);
        self.theta_star * (1.0 + self.amp[phase] * f * g)
    }

    /// (θ, θ_t, θ_ρ, θ_ρρ, θ_s, θ_ss, θ_ρs) at one point.
    #[allow(clippy::type_complexity)]
    fn theta_derivs(
        &self,
        t: f64,
        rho: f64,
        s: f64,
        phase: usize,
    ) -> (f64, f64, f64, f64, f64, f64, f64) {
        let (f, fp, fpp) = self.radial_profile(phase, rho);
        let (g, gs, gss, gt) = self.angular(t, s);
        let a = self.theta_star * self.amp[phase];
        (
            self.theta_star + a * f * g,
            a * f * gt,
            a * fp * g,
            a * fpp * g,
            a * f * gs,
            a * f * gss,
            a * fp * gs,
        )
    }

    pub fn h_exact(&self, t: f64, s: f64) -> f64 {
        self.h_amp * (self.h_mode * s).cos() * (1.0 + 0.5 * (self.omega_h * t).sin())
    }

    pub fn dth_exact(&self, t: f64, s: f64) -> f64 {
        self.h_amp * (self.h_mode * s).cos() * 0.5 * self.omega_h * (self.omega_h * t).cos()
    }

    fn h_derivs(&self, t: f64, s: f64) -> (f64, f64, f64) {
        let env = 1.0 + 0.5 * (self.omega_h * t).sin();
        let k = self.h_mode;
        (
            -self.h_amp * k * (k * s).sin() * env,
            -self.h_amp * k * k * (k * s).cos() * env,
            self.h_exact(t, s),
        )
    }

    /// Deformation Jacobian DΥ from the closed forms at one point.
    fn jac_at(&self, zeta: &CutoffProfile, t: f64, rho: f64, s: f64) -> Mat2 {
        let r = rho - self.r0;
        let z = zeta.value(r);
        let zp = zeta.deriv(r);
        let (h_s, _, h) = self.h_derivs(t, s);
        let (sin, cos) = s.sin_cos();
        let rhat = [cos, sin];
        let shat = [-sin, cos];
        Mat2::outer(rhat, rhat)
            .scale(zp * h)
            .add(&Mat2::outer(rhat, shat).scale(z * h_s / rho))
            .add(&Mat2::outer(shat, shat).scale(z * h / rho))
    }

    /// Physical-gradient pullback flux w = d(ϑ)·(I + DΥᵀ)⁻¹ ∇ϑ at a
    /// Cartesian point (closed forms throughout).
    fn flux_at(&self, zeta: &CutoffProfile, t: f64, z: [f64; 2], phase: usize) -> [f64; 2] {
        let rho = (z[0] * z[0] + z[1] * z[1]).sqrt();
        let s = z[1].atan2(z[0]);
        let (tv, _, t_r, _, t_s, _, _) = self.theta_derivs(t, rho, s, phase);
        let (sin, cos) = s.sin_cos();
        let grad = [t_r * cos - t_s * sin / rho, t_r * sin + t_s * cos / rho];
        let jac = self.jac_at(zeta, t, rho, s);
        let n = Mat2::IDENTITY
            .add(&jac.transpose())
            .inverse()
            .expect("manufactured deformation stays regular");
        let d = self.laws.d(tv, phase);
        let ng = n.apply(grad);
        [d * ng[0], d * ng[1]]
    }

    /// Bulk source: S_f = κ(ϑ)∂_tϑ + 𝒜(ϑ, h)ϑ - κ(ϑ)ℛ(h)ϑ on the exact
    /// fields. The divergence of the exact flux is taken with a fixed
    /// 5-point stencil (step independent of any grid).
    pub fn source_bulk(&self, zeta: &CutoffProfile, t: f64, rho: f64, s: f64) -> f64 {
        let phase = self.phase_of(rho);
        let (tv, t_t, t_r, _, t_s, _, _) = self.theta_derivs(t, rho, s, phase);
        let kap = self.laws.kappa(tv, phase);

        // -div of the physical flux by 5-point differences of closed forms
        let z = [rho * s.cos(), rho * s.sin()];
        let jac = self.jac_at(zeta, t, rho, s);
        let n = Mat2::IDENTITY.add(&jac.transpose()).inverse().unwrap();
        let step = 3e-4;
        let mut div = 0.0;
        for dir in 0..2 {
            // row i of N contracts with ∂_j w_i; assemble Σ_j N_{ij} ∂_j w_i
            for comp in 0..2 {
                let mut pts = [0.0; 4];
                for (k, &off) in [-2.0f64, -1.0, 1.0, 2.0].iter().enumerate() {
                    let mut zz = z;
                    zz[dir] += off * step;
                    pts[k] = self.flux_at(zeta, t, zz, phase)[comp];
                }
                let deriv = (pts[0] - 8.0 * pts[1] + 8.0 * pts[2] - pts[3]) / (12.0 * step);
                let n_cd = match (comp, dir) {
                    (0, 0) => n.a,
                    (0, 1) => n.b,
                    (1, 0) => n.c,
                    _ => n.d,
                };
                div += n_cd * deriv;
            }
        }
        let a_cont = -div;

        // ℛ(h)ϑ = (∇ϑ | (I + DΥ)⁻¹ ∂_tΥ)
        let (sin, cos) = s.sin_cos();
        let grad = [t_r * cos - t_s * sin / rho, t_r * sin + t_s * cos / rho];
        let zeta_v = zeta.value(rho - self.r0);
        let dth = self.dth_exact(t, s);
        let dt_ups = [zeta_v * dth * cos, zeta_v * dth * sin];
        let inv = Mat2::IDENTITY.add(&jac).inverse().unwrap();
        let vel = inv.apply(dt_ups);
        let r_cont = grad[0] * vel[0] + grad[1] * vel[1];

        kap * t_t + a_cont - kap * r_cont
    }

    /// Gibbs–Thomson source: S_g = [[ψ(ϑ_Σ)]] + σℋ(h) - γ(ϑ_Σ)β(h)∂_th.
    pub fn source_gibbs_thomson(&self, t: f64, s: f64) -> f64 {
        let trace = self.theta_star; // radial profiles vanish at the interface
        let (h_s, h_ss, h) = self.h_derivs(t, s);
        let r = self.r0 + h;
        let curv = -(r * r + 2.0 * h_s * h_s - r * h_ss) / (r * r + h_s * h_s).powf(1.5);
        let alpha = h_s / r;
        let beta = 1.0 / (1.0 + alpha * alpha).sqrt();
        self.laws.psi_jump(trace) + self.laws.sigma * curv
            - self.laws.gamma(trace) * beta * self.dth_exact(t, s)
    }

    /// Stefan source:
    /// S_q = l(ϑ_Σ)∂_th - [[d∂_νϑ]] + ([[d∇ϑ]] | M₄∇_Σh) - γβ(∂_th)².
    pub fn source_stefan(&self, zeta: &CutoffProfile, t: f64, s: f64) -> f64 {
        let trace = self.theta_star;
        let (h_s, _, h) = self.h_derivs(t, s);
        let dth = self.dth_exact(t, s);
        let (_, _, t_r1, _, _, _, _) = self.theta_derivs(t, self.r0, s, 0);
        let (_, _, t_r2, _, _, _, _) = self.theta_derivs(t, self.r0, s, 1);
        let d1 = self.laws.d(trace, 0);
        let d2 = self.laws.d(trace, 1);
        let flux_jump = d2 * t_r2 - d1 * t_r1;
        // the trace is s-constant, so the gradient jump is purely radial
        let (sin, cos) = s.sin_cos();
        let grad_jump = [(d2 * t_r2 - d1 * t_r1) * cos, (d2 * t_r2 - d1 * t_r1) * sin];
        let jac = self.jac_at(zeta, t, self.r0, s);
        let inv = Mat2::IDENTITY.add(&jac).inverse().unwrap();
        let m0 = 1.0 / (1.0 + h / self.r0);
        let m4 = inv.scale(m0);
        let gsh = [-sin * h_s / self.r0, cos * h_s / self.r0];
        let m4v = m4.apply(gsh);
        let alpha = h_s / (self.r0 + h);
        let beta = 1.0 / (1.0 + alpha * alpha).sqrt();
        let l = self.laws.latent_heat(trace).unwrap();
        l * dth - flux_jump + (grad_jump[0] * m4v[0] + grad_jump[1] * m4v[1])
            - self.laws.gamma(trace) * beta * dth * dth
    }

    pub fn initial_state(&self, grid: &Arc<Grid>) -> State {
        let theta = BulkField::from_fn(grid.clone(), |rho, s| self.theta_exact(0.0, rho, s));
        let h = HeightField::from_fn(self.r0, grid.n_s(), |s| self.h_exact(0.0, s));
        let dth = HeightField::from_fn(self.r0, grid.n_s(), |s| self.dth_exact(0.0, s));
        State::new(theta, h, dth)
    }

    /// Run the stepper with the manufactured sources; returns the final
    /// state and the sup errors (θ, h) against the exact solution.
    pub fn run(
        &self,
        grid: &Arc<Grid>,
        dt: f64,
        steps: usize,
        inner_iters: usize,
    ) -> Result<(State, f64, f64), StepError> {
        let state0 = self.initial_state(grid);
        let coeffs = stepper::freeze_coefficients(&state0.theta, &self.laws, 0)?;
        let mut st = Stepper::new(grid.clone(), self.laws.clone(), coeffs);
        let zeta = grid.chart.zeta();
        let zeta_q = grid.chart.zeta();
        let bulk = move |t: f64, rho: f64, s: f64| self.source_bulk(&zeta, t, rho, s);
        let gt = move |t: f64, s: f64| self.source_gibbs_thomson(t, s);
        let stf = move |t: f64, s: f64| self.source_stefan(&zeta_q, t, s);
        let forcing = Forcing {
            bulk: &bulk,
            gibbs_thomson: &gt,
            stefan: &stf,
        };
        let opts = AdvanceOpts {
            dt,
            inner_iters,
            tol: 1e-12,
        };
        let mut state = state0;
        for _ in 0..steps {
            let (next, _) = st.advance(&state, &opts, Some(&forcing))?;
            state = next;
        }
        let t_end = state.t;
        let mut theta_err: f64 = 0.0;
        for i in 0..grid.rows() {
            for j in 0..grid.n_s() {
                let exact = self.theta_exact(t_end, grid.rho[i], grid.s[j]);
                theta_err = theta_err.max((state.theta.at(i, j) - exact).abs());
            }
        }
        let mut h_err: f64 = 0.0;
        for j in 0..grid.n_s() {
            h_err = h_err.max((state.h.vals[j] - self.h_exact(t_end, grid.s[j])).abs());
        }
        Ok((state, theta_err, h_err))
    }
}
