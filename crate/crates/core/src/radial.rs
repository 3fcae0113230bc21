//! Independent radially symmetric two-phase solver with the Gibbs–Thomson
//! condition, used as an acceptance oracle for the transformed-domain
//! stepper. Front tracking on a boundary-fitted moving mesh: each phase lives
//! on its own uniform grid between a fixed wall and the moving interface
//! radius R(t); every implicit step solves the fully coupled nonlinear
//! (θ, R) system by Newton iteration with a bordered-banded Jacobian.
//!
//! Interface conditions at ρ = R(t), with V = Ṙ the outward normal velocity
//! and ℋ = -1/R:
//!   [[ψ(θ)]] - σ/R = γ(θ)V,
//!   [[d(θ)∂_ρθ]] = (l(θ) - γ(θ)V)V.

use thiserror::Error;

use crate::linalg::{BandMatrix, LinalgError};
use crate::materials::MaterialLaws;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle Newton iteration diverged at t = {t:.6} (residual {res:.3e})")]
    NewtonDiverged { t: f64, res: f64 },
    #[error("interface left the domain: R = {r:.6} outside ({lo:.6}, {hi:.6})")]
    InterfaceEscaped { r: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("oracle configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug)]
pub struct RadialConfig {
    pub r_in: f64,
    pub r_out: f64,
    /// Cells per phase block.
    pub m1: usize,
    pub m2: usize,
    pub dt: f64,
    pub steps: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
}

/// Moving-mesh state: interface radius and per-phase nodal temperatures
/// (θ₁ on [R_in, R], θ₂ on [R, R_out]; the interface value is shared).
#[derive(Clone, Debug)]
pub struct RadialState {
    pub r: f64,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub t: f64,
}

impl RadialState {
    pub fn interface_temperature(&self) -> f64 {
        *self.theta1.last().unwrap()
    }
}

#[derive(Clone, Debug)]
pub struct RadialTrajectory {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub final_state: RadialState,
}

/// Total energy 2π(Σ_p ∫ ε(θ)ρ dρ) + σ·2πR, trapezoidal on the moving mesh.
pub fn radial_energy(laws: &MaterialLaws, st: &RadialState, cfg: &RadialConfig) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut e = laws.sigma * tau * st.r;
    for (phase, (theta, (lo, hi))) in [
        (0usize, (&st.theta1, (cfg.r_in, st.r))),
        (1usize, (&st.theta2, (st.r, cfg.r_out))),
    ] {
        let n = theta.len() - 1;
        let dr = (hi - lo) / n as f64;
        for i in 0..n {
            let rho_a = lo + dr * i as f64;
            let rho_b = rho_a + dr;
            let fa = laws
                .derived(theta[i], phase)
                .map(|d| d.epsilon)
                .unwrap_or(0.0)
                * rho_a;
            let fb = laws
                .derived(theta[i + 1], phase)
                .map(|d| d.epsilon)
                .unwrap_or(0.0)
                * rho_b;
            e += tau * dr * 0.5 * (fa + fb);
        }
    }
    e
}

pub fn radial_entropy(laws: &MaterialLaws, st: &RadialState, cfg: &RadialConfig) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut s = 0.0;
    for (phase, (theta, (lo, hi))) in [
        (0usize, (&st.theta1, (cfg.r_in, st.r))),
        (1usize, (&st.theta2, (st.r, cfg.r_out))),
    ] {
        let n = theta.len() - 1;
        let dr = (hi - lo) / n as f64;
        for i in 0..n {
            let rho_a = lo + dr * i as f64;
            let rho_b = rho_a + dr;
            let fa = laws.derived(theta[i], phase).map(|d| d.eta).unwrap_or(0.0) * rho_a;
            let fb = laws
                .derived(theta[i + 1], phase)
                .map(|d| d.eta)
                .unwrap_or(0.0)
                * rho_b;
            s += tau * dr * 0.5 * (fa + fb);
        }
    }
    s
}

/// Residual of the implicit step at candidate state `u` (packed unknowns)
/// given the previous state. Layout: [θ₁ nodes..., θ_Γ at slot m1, θ₂
/// nodes..., outer wall at slot m1+m2, R at the end].
struct Residual<'a> {
    laws: &'a MaterialLaws,
    cfg: &'a RadialConfig,
    prev: &'a RadialState,
}

impl Residual<'_> {
    fn n_unknowns(&self) -> usize {
        self.cfg.m1 + self.cfg.m2 + 2
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let (m1, m2) = (self.cfg.m1, self.cfg.m2);
        let dt = self.cfg.dt;
        let r_new = u[m1 + m2 + 1];
        let rdot = (r_new - self.prev.r) / dt;
        let laws = self.laws;

        let theta = |slot: usize| u[slot];
        let theta_gamma = theta(m1);

        // phase blocks at the new time level
        let blocks = [
            (0usize, self.cfg.r_in, r_new, m1, 0usize),
            (1usize, r_new, self.cfg.r_out, m2, m1),
        ];
        for &(phase, lo, hi, m, base) in &blocks {
            let dr = (hi - lo) / m as f64;
            for k in 0..=m {
                let slot = base + k;
                // the interface slot carries the Gibbs–Thomson row instead
                if slot == m1 {
                    continue;
                }
                let rho = lo + dr * k as f64;
                let tv = theta(slot);
                let kap = laws.kappa(tv, phase);
                // previous value at the same mesh index
                let told = if phase == 0 {
                    self.prev.theta1[k]
                } else {
                    self.prev.theta2[k]
                };
                // mesh velocity: node follows the stretching of its block
                let w = if phase == 0 {
                    (k as f64 / m as f64) * rdot
                } else {
                    (1.0 - k as f64 / m as f64) * rdot
                };
                let diff = if k == 0 || k == m {
                    // wall rows: half-cell flux balance with zero wall flux,
                    // weighted like the trapezoid energy quadrature so the
                    // discrete budget telescopes
                    if k == 0 {
                        let tp = theta(slot + 1);
                        let d_p = laws.d(0.5 * (tv + tp), phase);
                        2.0 * (rho + 0.5 * dr) * d_p * (tp - tv) / (rho * dr * dr)
                    } else {
                        let tm = theta(slot - 1);
                        let d_m = laws.d(0.5 * (tv + tm), phase);
                        -2.0 * (rho - 0.5 * dr) * d_m * (tv - tm) / (rho * dr * dr)
                    }
                } else {
                    let (tm, tp) = (theta(slot - 1), theta(slot + 1));
                    let d_p = laws.d(0.5 * (tv + tp), phase);
                    let d_m = laws.d(0.5 * (tv + tm), phase);
                    let rho_p = rho + 0.5 * dr;
                    let rho_m = rho - 0.5 * dr;
                    (rho_p * d_p * (tp - tv) - rho_m * d_m * (tv - tm)) / (rho * dr * dr)
                };
                let conv = if k == 0 || k == m {
                    0.0
                } else {
                    w * (theta(slot + 1) - theta(slot - 1)) / (2.0 * dr)
                };
                // dt-scaled residual keeps the Newton tolerance reachable
                // for small steps
                out[slot] = kap * ((tv - told) - dt * conv) - dt * diff;
            }
        }

        // Gibbs–Thomson row at the interface slot (dt-scaled: ΔR instead of
        // Ṙ keeps the residual free of 1/dt-amplified rounding noise)
        let gamma = laws.gamma(theta_gamma);
        let dr_step = r_new - self.prev.r;
        out[m1] = dt * (laws.psi_jump(theta_gamma) - laws.sigma / r_new) - gamma * dr_step;

        // Stefan row at the border slot
        let dr1 = (r_new - self.cfg.r_in) / m1 as f64;
        let dr2 = (self.cfg.r_out - r_new) / m2 as f64;
        let flux1 = laws.d(theta_gamma, 0)
            * (3.0 * theta_gamma - 4.0 * theta(m1 - 1) + theta(m1 - 2))
            / (2.0 * dr1);
        let flux2 = laws.d(theta_gamma, 1)
            * (-3.0 * theta_gamma + 4.0 * theta(m1 + 1) - theta(m1 + 2))
            / (2.0 * dr2);
        let l = theta_gamma * laws.dpsi_jump(theta_gamma);
        out[m1 + m2 + 1] = dt * (flux2 - flux1) - l * dr_step + gamma * dr_step * dr_step / dt;
        let _ = rdot;
    }
}

/// Advance the radial problem over `cfg.steps` implicit steps.
pub fn solve_radial(
    laws: &MaterialLaws,
    cfg: &RadialConfig,
    init: RadialState,
) -> Result<RadialTrajectory, OracleError> {
    if init.theta1.len() != cfg.m1 + 1 || init.theta2.len() != cfg.m2 + 1 {
        return Err(OracleError::Config(format!(
            "state has {}+{} nodes, config wants {}+{}",
            init.theta1.len(),
            init.theta2.len(),
            cfg.m1 + 1,
            cfg.m2 + 1
        )));
    }
    let mut state = init;
    let mut times = vec![state.t];
    let mut radii = vec![state.r];
    let mut energy = vec![radial_energy(laws, &state, cfg)];
    let mut entropy = vec![radial_entropy(laws, &state, cfg)];
    for _ in 0..cfg.steps {
        state = step(laws, cfg, &state)?;
        if state.r <= cfg.r_in || state.r >= cfg.r_out {
            return Err(OracleError::InterfaceEscaped {
                r: state.r,
                lo: cfg.r_in,
                hi: cfg.r_out,
            });
        }
        times.push(state.t);
        radii.push(state.r);
        energy.push(radial_energy(laws, &state, cfg));
        entropy.push(radial_entropy(laws, &state, cfg));
    }
    Ok(RadialTrajectory {
        times,
        radii,
        energy,
        entropy,
        final_state: state,
    })
}

fn step(
    laws: &MaterialLaws,
    cfg: &RadialConfig,
    prev: &RadialState,
) -> Result<RadialState, OracleError> {
    let res = Residual { laws, cfg, prev };
    let n = res.n_unknowns();
    let nb = n - 1; // banded part (θ slots), R is the border
    let (m1, m2) = (cfg.m1, cfg.m2);

    // initial guess: previous state
    let mut u: Vec<f64> = Vec::with_capacity(n);
    u.extend_from_slice(&prev.theta1);
    u.extend_from_slice(&prev.theta2[1..]);
    u.push(prev.r);

    let mut f = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for _newton in 0..cfg.newton_max {
        res.eval(&u, &mut f);
        let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if fmax < cfg.newton_tol {
            break;
        }

        // banded θ-part Jacobian by colored finite differences; the wall
        // rows reach three slots inward, so the band and the coloring both
        // use width 3
        let mut band = BandMatrix::new(nb, 3, 3);
        let eps = 1e-7;
        for color in 0..7 {
            let mut up = u.clone();
            for slot in (0..nb).filter(|s| s % 7 == color) {
                up[slot] += eps;
            }
            res.eval(&up, &mut scratch);
            for row in 0..nb {
                for slot in row.saturating_sub(3)..=(row + 3).min(nb - 1) {
                    if slot % 7 == color {
                        band.set(row, slot, (scratch[row] - f[row]) / eps);
                    }
                }
            }
        }
        // border column: d residual / dR
        let mut up = u.clone();
        up[n - 1] += eps;
        res.eval(&up, &mut scratch);
        let g: Vec<f64> = (0..nb).map(|row| (scratch[row] - f[row]) / eps).collect();
        let d_corner = (scratch[n - 1] - f[n - 1]) / eps;
        // border row: d Stefan residual / d θ_slot, nonzero near the interface
        let mut c = vec![0.0; nb];
        for slot in m1.saturating_sub(2)..=(m1 + 2).min(nb - 1) {
            let mut us = u.clone();
            us[slot] += eps;
            res.eval(&us, &mut scratch);
            c[slot] = (scratch[n - 1] - f[n - 1]) / eps;
        }

        // bordered solve: J = [[B, g], [cᵀ, d]], J δ = -f
        let lu = band.factor()?;
        let mut y = f[..nb].to_vec();
        lu.solve(&mut y); // y = B⁻¹ f_main
        let mut z = g.clone();
        lu.solve(&mut z); // z = B⁻¹ g
        let cy: f64 = c.iter().zip(&y).map(|(a, b)| a * b).sum();
        let cz: f64 = c.iter().zip(&z).map(|(a, b)| a * b).sum();
        let denom = d_corner - cz;
        if denom.abs() < 1e-14 {
            return Err(OracleError::NewtonDiverged {
                t: prev.t,
                res: fmax,
            });
        }
        let d_r = (-f[n - 1] + cy) / denom;
        for slot in 0..nb {
            u[slot] += -y[slot] - z[slot] * d_r;
        }
        u[n - 1] += d_r;
    }
    res.eval(&u, &mut f);
    let fmax = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // the finite-difference Jacobian floors the achievable residual around
    // 1e-11; two orders above the target still flags genuine divergence
    if !(fmax < cfg.newton_tol * 100.0) {
        return Err(OracleError::NewtonDiverged {
            t: prev.t,
            res: fmax,
        });
    }

    Ok(RadialState {
        r: u[n - 1],
        theta1: u[0..=m1].to_vec(),
        theta2: u[m1..m1 + m2 + 1].to_vec(),
        t: prev.t + cfg.dt,
    })
}

/// Max over time of the relative interface-radius discrepancy between a main
/// solver trajectory (t, R) and the oracle's (linear interpolation in t).
pub fn compare(main: &[(f64, f64)], oracle: &RadialTrajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for &(t, r_main) in main {
        let r_o = interp_time(&oracle.times, &oracle.radii, t);
        worst = worst.max((r_main - r_o).abs() / r_o.abs());
    }
    worst
}

fn interp_time(times: &[f64], vals: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return vals[0];
    }
    if t >= *times.last().unwrap() {
        return *vals.last().unwrap();
    }
    let mut lo = 0;
    let mut hi = times.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if times[mid] <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = (t - times[lo]) / (times[hi] - times[lo]);
    vals[lo] * (1.0 - w) + vals[hi] * w
}

/// Compatible radial perturbation profiles: zero value and slope at the
/// interface, zero slope at the walls.
pub fn melt_profile(phase: usize, rho: f64, r_in: f64, r_ifc: f64, r_out: f64) -> f64 {
    if phase == 0 {
        let x = (rho - r_in) / (r_ifc - r_in);
        1.0 - (2.0 * std::f64::consts::PI * x).cos()
    } else {
        let x = (rho - r_ifc) / (r_out - r_ifc);
        1.0 - (2.0 * std::f64::consts::PI * x).cos()
    }
}
