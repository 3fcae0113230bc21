//! Localized space-time translation family on chart coordinates (x, y) of
//! the tubular strip, with y the signed distance to Σ and x the (periodic)
//! tangential coordinate, plus the localized time shift ρ_λ(t) = t + ξ(t)λ.
//!
//! The spatial map is θ_{μ,η}(x, y) = (x + χ_m(x)ϖ(y)μ, y + χ_m(x)χ(y)η)
//! with nested bump supports: χ concentrates strictly on one side of Σ inside
//! the ζ ≡ 1 plateau, ϖ is flat over the whole working band, so near Σ the
//! map translates horizontally only. The algebraic identities of the family
//! (composition, commutator with ∂_t, invariance of the normal derivative)
//! are recast here as numerical probes on gridded fields.

use thiserror::Error;

use crate::geometry::CutoffProfile;
use crate::linalg::Mat2;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("probe invariant violated: {0}")]
    Invariant(String),
    #[error("parameters ({mu}, {eta}) outside the ball of radius {r0}")]
    OutsideBall { mu: f64, eta: f64, r0: f64 },
    #[error("Newton inverse failed to converge in {0} iterations (parameter ball too large?)")]
    NewtonDiverged(usize),
    #[error("evaluation point {0:.6} outside the grid along axis {1}")]
    OutOfDomain(f64, &'static str),
}

/// One instance of the localized translation family.
#[derive(Clone, Debug)]
pub struct ParamDiffeo {
    pub x_c: f64,
    pub y_c: f64,
    pub eps0: f64,
    pub t_c: f64,
    /// Temporal locality radius (the ξ bump is 1 on B(t_c, ε₀ᵗ), supported
    /// in B(t_c, 2ε₀ᵗ)); independent of the spatial ε₀ so the time grid can
    /// resolve the ramp.
    pub eps0_t: f64,
    /// Parameter-ball radius r₀ (defaults to ε₀/4).
    pub r0_ball: f64,
    /// Tube half-width a of the underlying chart.
    pub a: f64,
    /// Period of the tangential coordinate, if periodic.
    pub x_period: Option<f64>,
    chi_m: CutoffProfile,
    chi: CutoffProfile,
    varpi: CutoffProfile,
    xi_t: CutoffProfile,
}

impl ParamDiffeo {
    /// Build the family centered at (x_c, y_c) (off Σ: y_c ≠ 0) with locality
    /// radius ε₀ and temporal center t_c; validates the support nesting.
    pub fn new(
        x_c: f64,
        y_c: f64,
        eps0: f64,
        t_c: f64,
        eps0_t: f64,
        a: f64,
        x_period: Option<f64>,
    ) -> Result<Self, ProbeError> {
        if eps0 <= 0.0 || eps0_t <= 0.0 {
            return Err(ProbeError::Invariant(format!(
                "locality radii must be positive, got eps0 = {eps0}, eps0_t = {eps0_t}"
            )));
        }
        if y_c == 0.0 {
            return Err(ProbeError::Invariant(
                "center must lie off Σ (y_c != 0)".into(),
            ));
        }
        // B(y_c, 5ε₀) strictly inside one side of the ζ ≡ 1 plateau (0, a/3)
        if y_c.abs() - 5.0 * eps0 <= 0.0 || y_c.abs() + 5.0 * eps0 >= a / 3.0 {
            return Err(ProbeError::Invariant(format!(
                "B(y_c, 5eps0) = B({y_c}, {}) must sit strictly inside one side of (0, {})",
                5.0 * eps0,
                a / 3.0
            )));
        }
        if let Some(period) = x_period {
            if 5.0 * eps0 >= period / 2.0 {
                return Err(ProbeError::Invariant(format!(
                    "horizontal bump B(x_c, 5eps0) must fit in half a period ({period})"
                )));
            }
        }
        Ok(ParamDiffeo {
            x_c,
            y_c,
            eps0,
            t_c,
            eps0_t,
            r0_ball: eps0 / 4.0,
            a,
            x_period,
            chi_m: CutoffProfile::chi_m(0.0, eps0), // evaluated on wrapped offsets
            chi: CutoffProfile::chi(y_c, eps0),
            varpi: CutoffProfile::varpi(a),
            xi_t: CutoffProfile::xi_time(t_c, eps0_t),
        })
    }

    fn check_ball(&self, mu: f64, eta: f64) -> Result<(), ProbeError> {
        if mu * mu + eta * eta > self.r0_ball * self.r0_ball * (1.0 + 1e-12) {
            return Err(ProbeError::OutsideBall {
                mu,
                eta,
                r0: self.r0_ball,
            });
        }
        Ok(())
    }

    /// Horizontal offset from the bump center, wrapped to the nearest image.
    fn dx(&self, x: f64) -> f64 {
        let mut d = x - self.x_c;
        if let Some(period) = self.x_period {
            d = (d + period / 2.0).rem_euclid(period) - period / 2.0;
        }
        d
    }

    pub fn chi_m_at(&self, x: f64) -> f64 {
        self.chi_m.value(self.dx(x))
    }

    pub fn chi_at(&self, y: f64) -> f64 {
        self.chi.value(y)
    }

    fn chi_m_deriv_at(&self, x: f64) -> f64 {
        self.chi_m.deriv(self.dx(x))
    }

    pub fn xi_time_at(&self, t: f64) -> f64 {
        self.xi_t.value(t)
    }

    pub fn xi_time_deriv_at(&self, t: f64) -> f64 {
        self.xi_t.deriv(t)
    }

    /// Localized temporal translation ρ_λ(t) = t + ξ(t)λ.
    pub fn rho_lambda(&self, lambda: f64, t: f64) -> f64 {
        let xv = self.xi_t.value(t);
        if xv == 0.0 {
            t
        } else {
            t + xv * lambda
        }
    }

    /// θ_{μ,η}(x, y) = (x + χ_m(x)ϖ(y)μ, y + χ_m(x)χ(y)η).
    pub fn forward(&self, mu: f64, eta: f64, p: [f64; 2]) -> Result<[f64; 2], ProbeError> {
        self.check_ball(mu, eta)?;
        Ok(self.forward_unchecked(mu, eta, p))
    }

    fn forward_unchecked(&self, mu: f64, eta: f64, p: [f64; 2]) -> [f64; 2] {
        let cm = self.chi_m_at(p[0]);
        if cm == 0.0 {
            return p;
        }
        [
            p[0] + cm * self.varpi.value(p[1]) * mu,
            p[1] + cm * self.chi.value(p[1]) * eta,
        ]
    }

    /// Jacobian of the forward map at a point.
    pub fn jacobian(&self, mu: f64, eta: f64, p: [f64; 2]) -> Mat2 {
        let cm = self.chi_m_at(p[0]);
        let cmp = self.chi_m_deriv_at(p[0]);
        let w = self.varpi.value(p[1]);
        let wp = self.varpi.deriv(p[1]);
        let ch = self.chi.value(p[1]);
        let chp = self.chi.deriv(p[1]);
        Mat2::new(
            1.0 + cmp * w * mu,
            cm * wp * mu,
            cmp * ch * eta,
            1.0 + cm * chp * eta,
        )
    }

    /// Inverse by Newton iteration to residual 1e-13.
    pub fn inverse(&self, mu: f64, eta: f64, p: [f64; 2]) -> Result<[f64; 2], ProbeError> {
        self.check_ball(mu, eta)?;
        let mut q = p;
        for _ in 0..50 {
            let f = self.forward_unchecked(mu, eta, q);
            let res = [f[0] - p[0], f[1] - p[1]];
            if res[0].abs().max(res[1].abs()) < 1e-13 {
                return Ok(q);
            }
            let jinv = self
                .jacobian(mu, eta, q)
                .inverse()
                .map_err(|_| ProbeError::NewtonDiverged(50))?;
            let step = jinv.apply(res);
            q = [q[0] - step[0], q[1] - step[1]];
        }
        Err(ProbeError::NewtonDiverged(50))
    }
}

/// A scalar field on a uniform (t, x, y) grid; x may be periodic.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub x_periodic: bool,
    pub y0: f64,
    pub dy: f64,
    pub ny: usize,
    /// Row-major values, index (it*nx + ix)*ny + iy.
    pub vals: Vec<f64>,
}

impl SpaceTimeField {
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn(
        t0: f64,
        dt: f64,
        nt: usize,
        x0: f64,
        dx: f64,
        nx: usize,
        x_periodic: bool,
        y0: f64,
        dy: f64,
        ny: usize,
        mut f: impl FnMut(f64, f64, f64) -> f64,
    ) -> Self {
        let mut vals = Vec::with_capacity(nt * nx * ny);
        for it in 0..nt {
            for ix in 0..nx {
                for iy in 0..ny {
                    vals.push(f(
                        t0 + dt * it as f64,
                        x0 + dx * ix as f64,
                        y0 + dy * iy as f64,
                    ));
                }
            }
        }
        SpaceTimeField {
            t0,
            dt,
            nt,
            x0,
            dx,
            nx,
            x_periodic,
            y0,
            dy,
            ny,
            vals,
        }
    }

    #[inline]
    pub fn at(&self, it: usize, ix: usize, iy: usize) -> f64 {
        self.vals[(it * self.nx + ix) * self.ny + iy]
    }

    pub fn zero_like(&self) -> SpaceTimeField {
        SpaceTimeField {
            vals: vec![0.0; self.vals.len()],
            ..self.clone()
        }
    }

    /// Tensor cubic (4-point Lagrange) interpolation. Exact at grid nodes.
    /// A single-row y-axis (surface fields over Σ) is treated as constant
    /// along y.
    pub fn eval(&self, t: f64, x: f64, y: f64) -> Result<f64, ProbeError> {
        let (it0, wt) = stencil((t - self.t0) / self.dt, self.nt, false, "t")?;
        let (ix0, wx) = stencil((x - self.x0) / self.dx, self.nx, self.x_periodic, "x")?;
        let (iy0, wy) = if self.ny == 1 {
            (1isize, [0.0, 1.0, 0.0, 0.0])
        } else {
            stencil((y - self.y0) / self.dy, self.ny, false, "y")?
        };
        let mut acc = 0.0;
        for (a, &wa) in wt.iter().enumerate() {
            if wa == 0.0 {
                continue;
            }
            let it = clamp_index(it0 + a as isize - 1, self.nt, false);
            let mut acc_x = 0.0;
            for (b, &wb) in wx.iter().enumerate() {
                if wb == 0.0 {
                    continue;
                }
                let ix = clamp_index(ix0 + b as isize - 1, self.nx, self.x_periodic);
                let mut acc_y = 0.0;
                for (c, &wc) in wy.iter().enumerate() {
                    if wc == 0.0 {
                        continue;
                    }
                    let iy = clamp_index(iy0 + c as isize - 1, self.ny, false);
                    acc_y += wc * self.at(it, ix, iy);
                }
                acc_x += wb * acc_y;
            }
            acc += wa * acc_x;
        }
        Ok(acc)
    }

    /// Richardson estimate of the fourth-order time-differencing error:
    /// the stencil on spacing dt versus 2·dt differs by 15× the dt-stencil
    /// error, evaluated away from the first/last four slices.
    pub fn time_fd_error_estimate(&self) -> f64 {
        let mut worst: f64 = 0.0;
        if self.nt < 9 {
            return 0.0;
        }
        for it in 4..self.nt - 4 {
            for ix in 0..self.nx {
                for iy in 0..self.ny {
                    let f = |k: isize| self.at((it as isize + k) as usize, ix, iy);
                    let d1 = (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * self.dt);
                    let d2 = (-f(4) + 8.0 * f(2) - 8.0 * f(-2) + f(-4)) / (24.0 * self.dt);
                    worst = worst.max((d1 - d2).abs() / 15.0);
                }
            }
        }
        worst
    }

    /// Fourth-order central time derivative (second-order one-sided at the
    /// first/last two slices).
    pub fn time_derivative(&self) -> SpaceTimeField {
        let mut out = self.zero_like();
        let nt = self.nt;
        for it in 0..nt {
            for ix in 0..self.nx {
                for iy in 0..self.ny {
                    let f = |k: usize| self.at(k, ix, iy);
                    let v = if it >= 2 && it + 2 < nt {
                        (-f(it + 2) + 8.0 * f(it + 1) - 8.0 * f(it - 1) + f(it - 2))
                            / (12.0 * self.dt)
                    } else if it + 1 < nt && it >= 1 {
                        (f(it + 1) - f(it - 1)) / (2.0 * self.dt)
                    } else if it == 0 {
                        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * self.dt)
                    } else {
                        (3.0 * f(nt - 1) - 4.0 * f(nt - 2) + f(nt - 3)) / (2.0 * self.dt)
                    };
                    out.vals[(it * self.nx + ix) * self.ny + iy] = v;
                }
            }
        }
        out
    }
}

/// Index base and Lagrange weights for a cubic stencil at fractional
/// coordinate u; snaps to exact nodes so that node evaluation is bitwise.
/// Non-periodic axes shift the stencil inward at the edges (exactness for
/// cubics is kept; the local coordinate just leaves [0, 1]).
fn stencil(
    u: f64,
    n: usize,
    periodic: bool,
    axis: &'static str,
) -> Result<(isize, [f64; 4]), ProbeError> {
    let mut u = u;
    let r = u.round();
    if (u - r).abs() < 1e-9 {
        u = r;
    }
    if periodic {
        let i0 = u.floor() as isize;
        return Ok((i0, lagrange_weights(u - i0 as f64)));
    }
    if u < 0.0 || u > (n - 1) as f64 {
        return Err(ProbeError::OutOfDomain(u, axis));
    }
    let base = (u.floor() as isize).clamp(1, n as isize - 3);
    Ok((base, lagrange_weights(u - base as f64)))
}

/// Cubic Lagrange weights on nodes at local positions {-1, 0, 1, 2}.
fn lagrange_weights(u: f64) -> [f64; 4] {
    [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ]
}

fn clamp_index(i: isize, n: usize, periodic: bool) -> usize {
    if periodic {
        (i.rem_euclid(n as isize)) as usize
    } else {
        i.clamp(0, n as isize - 1) as usize
    }
}

/// Space-time pullback u_{λ,μ,η}(t, x, y) = u(ρ_λ(t), θ_{ξ(t)μ, ξ(t)η}(x, y)).
pub fn pullback_spacetime(
    d: &ParamDiffeo,
    lambda: f64,
    mu: f64,
    eta: f64,
    fld: &SpaceTimeField,
) -> Result<SpaceTimeField, ProbeError> {
    d.check_ball(mu, eta)?;
    let mut out = fld.zero_like();
    for it in 0..fld.nt {
        let t = fld.t0 + fld.dt * it as f64;
        let xi = d.xi_time_at(t);
        let t_shift = d.rho_lambda(lambda, t);
        for ix in 0..fld.nx {
            let x = fld.x0 + fld.dx * ix as f64;
            for iy in 0..fld.ny {
                let y = fld.y0 + fld.dy * iy as f64;
                let q = d.forward_unchecked(xi * mu, xi * eta, [x, y]);
                out.vals[(it * fld.nx + ix) * fld.ny + iy] = fld.eval(t_shift, q[0], q[1])?;
            }
        }
    }
    Ok(out)
}

/// Commutator probe B := ∂_t[u_{λ,μ,η}] - (1 + ξ′λ)·(∂_t u)_{λ,μ,η}.
/// Edge time slices carry lower-order differences; restrict attention to the
/// interior when measuring.
pub fn commutator_b(
    d: &ParamDiffeo,
    lambda: f64,
    mu: f64,
    eta: f64,
    fld: &SpaceTimeField,
) -> Result<SpaceTimeField, ProbeError> {
    let pulled = pullback_spacetime(d, lambda, mu, eta, fld)?;
    let d_pulled = pulled.time_derivative();
    let dt_fld = fld.time_derivative();
    let pulled_dt = pullback_spacetime(d, lambda, mu, eta, &dt_fld)?;
    let mut out = fld.zero_like();
    for it in 0..fld.nt {
        let t = fld.t0 + fld.dt * it as f64;
        let factor = 1.0 + d.xi_time_deriv_at(t) * lambda;
        for ix in 0..fld.nx {
            for iy in 0..fld.ny {
                let idx = (it * fld.nx + ix) * fld.ny + iy;
                out.vals[idx] = d_pulled.vals[idx] - factor * pulled_dt.vals[idx];
            }
        }
    }
    Ok(out)
}

/// A scalar field on a uniform (x, y) plane; x may be periodic.
#[derive(Clone, Debug)]
pub struct PlaneField {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub x_periodic: bool,
    pub y0: f64,
    pub dy: f64,
    pub ny: usize,
    pub vals: Vec<f64>,
}

impl PlaneField {
    pub fn from_fn(
        x0: f64,
        dx: f64,
        nx: usize,
        x_periodic: bool,
        y0: f64,
        dy: f64,
        ny: usize,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut vals = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                vals.push(f(x0 + dx * ix as f64, y0 + dy * iy as f64));
            }
        }
        PlaneField {
            x0,
            dx,
            nx,
            x_periodic,
            y0,
            dy,
            ny,
            vals,
        }
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.vals[ix * self.ny + iy]
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ProbeError> {
        let (ix0, wx) = stencil((x - self.x0) / self.dx, self.nx, self.x_periodic, "x")?;
        let (iy0, wy) = stencil((y - self.y0) / self.dy, self.ny, false, "y")?;
        let mut acc = 0.0;
        for (b, &wb) in wx.iter().enumerate() {
            if wb == 0.0 {
                continue;
            }
            let ix = clamp_index(ix0 + b as isize - 1, self.nx, self.x_periodic);
            let mut acc_y = 0.0;
            for (c, &wc) in wy.iter().enumerate() {
                if wc == 0.0 {
                    continue;
                }
                let iy = clamp_index(iy0 + c as isize - 1, self.ny, false);
                acc_y += wc * self.at(ix, iy);
            }
            acc += wb * acc_y;
        }
        Ok(acc)
    }

    /// Fourth-order vertical derivative (second-order one-sided near edges).
    pub fn dy_field(&self) -> PlaneField {
        let mut out = self.clone();
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                let f = |k: usize| self.at(ix, k);
                let v = if iy >= 2 && iy + 2 < self.ny {
                    (-f(iy + 2) + 8.0 * f(iy + 1) - 8.0 * f(iy - 1) + f(iy - 2)) / (12.0 * self.dy)
                } else if iy >= 1 && iy + 1 < self.ny {
                    (f(iy + 1) - f(iy - 1)) / (2.0 * self.dy)
                } else if iy == 0 {
                    (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * self.dy)
                } else {
                    (3.0 * f(self.ny - 1) - 4.0 * f(self.ny - 2) + f(self.ny - 3)) / (2.0 * self.dy)
                };
                out.vals[ix * self.ny + iy] = v;
            }
        }
        out
    }
}

/// Residual of the normal-derivative invariance T_μ ∂_ν T⁻¹_{μ,η} = ∂_ν over
/// interface-adjacent nodes (|y| below the foot of the vertical bump, where
/// the map translates horizontally with a y-independent displacement).
///
/// The composite (∂_y T⁻¹u)(θ_μ(p)) is evaluated by differencing
/// T⁻¹u = u∘θ⁻¹ along the vertical fiber through θ_μ(p) directly, so only
/// the smooth input field is ever interpolated (the pushforward itself has
/// bump-scale tangential structure that a probe grid need not resolve).
pub fn normal_derivative_invariance(
    d: &ParamDiffeo,
    mu: f64,
    eta: f64,
    u: &PlaneField,
) -> Result<f64, ProbeError> {
    d.check_ball(mu, eta)?;
    let du = u.dy_field();
    // stay clear of the vertical bump by the FD stencil reach as well
    let y_margin = d.y_c.abs() - 2.0 * d.eps0 - d.r0_ball - 3.0 * u.dy;
    let mut worst: f64 = 0.0;
    let pushed = |x: f64, y: f64| -> Result<f64, ProbeError> {
        let q = d.inverse(mu, eta, [x, y])?;
        u.eval(q[0], q[1])
    };
    for ix in 0..u.nx {
        let x = u.x0 + u.dx * ix as f64;
        for iy in 2..u.ny - 2 {
            let y = u.y0 + u.dy * iy as f64;
            if y.abs() >= y_margin {
                continue;
            }
            let q = d.forward(mu, 0.0, [x, y])?;
            let f = |k: f64| pushed(q[0], y + k * u.dy);
            let lhs = (-f(2.0)? + 8.0 * f(1.0)? - 8.0 * f(-1.0)? + f(-2.0)?) / (12.0 * u.dy);
            worst = worst.max((lhs - du.at(ix, iy)).abs());
        }
    }
    Ok(worst)
}

/// Divided-difference table of the parameter dependence at 0: first and
/// second central differences of the pulled-back fields in each parameter
/// direction, reported as sup-norms.
#[derive(Clone, Debug)]
pub struct ProbeTable {
    /// Rows λ, μ, η; columns order 1, order 2.
    pub theta: [[f64; 2]; 3],
    /// Rows λ, μ (the height pullback has no η direction).
    pub h: [[f64; 2]; 2],
    pub step: f64,
}

/// Surface-field pullback h_{λ,μ}(t, x) = h(ρ_λ(t), x + χ_m(x)ξ(t)μ)
/// (the horizontal map restricted to Σ, where ϖ ≡ 1).
pub fn pullback_surface(
    d: &ParamDiffeo,
    lambda: f64,
    mu: f64,
    fld: &SpaceTimeField,
) -> Result<SpaceTimeField, ProbeError> {
    d.check_ball(mu, 0.0)?;
    let mut out = fld.zero_like();
    for it in 0..fld.nt {
        let t = fld.t0 + fld.dt * it as f64;
        let xi = d.xi_time_at(t);
        let t_shift = d.rho_lambda(lambda, t);
        for ix in 0..fld.nx {
            let x = fld.x0 + fld.dx * ix as f64;
            let xs = x + d.chi_m_at(x) * xi * mu;
            for iy in 0..fld.ny {
                let y = fld.y0 + fld.dy * iy as f64;
                out.vals[(it * fld.nx + ix) * fld.ny + iy] = fld.eval(t_shift, xs, y)?;
            }
        }
    }
    Ok(out)
}

pub fn smoothness_probe(
    d: &ParamDiffeo,
    theta: &SpaceTimeField,
    h: &SpaceTimeField,
    step: f64,
) -> Result<ProbeTable, ProbeError> {
    let sup = |f: &SpaceTimeField| -> f64 {
        let mut m: f64 = 0.0;
        for it in 2..f.nt - 2 {
            for ix in 0..f.nx {
                for iy in 0..f.ny {
                    m = m.max(f.at(it, ix, iy).abs());
                }
            }
        }
        m
    };
    let diff_tables = |plus: &SpaceTimeField, base: &SpaceTimeField, minus: &SpaceTimeField| {
        let mut d1 = base.zero_like();
        let mut d2 = base.zero_like();
        for i in 0..base.vals.len() {
            d1.vals[i] = (plus.vals[i] - minus.vals[i]) / (2.0 * step);
            d2.vals[i] = (plus.vals[i] - 2.0 * base.vals[i] + minus.vals[i]) / (step * step);
        }
        (sup(&d1), sup(&d2))
    };

    let mut th = [[0.0; 2]; 3];
    let base_t = pullback_spacetime(d, 0.0, 0.0, 0.0, theta)?;
    for (k, dir) in [
        (0usize, [step, 0.0, 0.0]),
        (1, [0.0, step, 0.0]),
        (2, [0.0, 0.0, step]),
    ] {
        let plus = pullback_spacetime(d, dir[0], dir[1], dir[2], theta)?;
        let minus = pullback_spacetime(d, -dir[0], -dir[1], -dir[2], theta)?;
        let (d1, d2) = diff_tables(&plus, &base_t, &minus);
        th[k] = [d1, d2];
    }
    let mut hh = [[0.0; 2]; 2];
    let base_h = pullback_surface(d, 0.0, 0.0, h)?;
    for (k, dir) in [(0usize, [step, 0.0]), (1, [0.0, step])] {
        let plus = pullback_surface(d, dir[0], dir[1], h)?;
        let minus = pullback_surface(d, -dir[0], -dir[1], h)?;
        let (d1, d2) = diff_tables(&plus, &base_h, &minus);
        hh[k] = [d1, d2];
    }
    Ok(ProbeTable {
        theta: th,
        h: hh,
        step,
    })
}
