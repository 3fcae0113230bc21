//! Height-function calculus on the reference circle Σ: tangential
//! derivatives, the Weingarten-resolvent factor M₀, the normal decomposition
//! α, β, ν_Γ, the mean curvature of the graph Γ_h, and the surface heat
//! semigroup.
//!
//! Convention: the Weingarten value of the circle is L_Σ = -1/R0, so
//! M₀(h) = (1 + h/R0)⁻¹ and α(h) = M₀(h)·h_σ. With ν_Γ = β(ν_Σ - α) this
//! reproduces the exact outward normal of the polar graph ρ = R0 + h(s), and
//! the curvature sign gives ℋ = -1/R for a circle of radius R.

use thiserror::Error;

use crate::fields::HeightField;
use crate::spectral;

#[derive(Debug, Error)]
pub enum InterfaceError {
    #[error("singular geometry: 1 + h/R0 = {0:.3e} <= 0 (M0 not invertible)")]
    SingularGeometry(f64),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
}

/// Arclength derivatives (h_σ, h_σσ) = (h′/R0, h″/R0²), spectral in s.
pub fn surface_derivatives(h: &HeightField) -> (Vec<f64>, Vec<f64>) {
    let d1 = spectral::derivative(&h.vals, 1);
    let d2 = spectral::derivative(&h.vals, 2);
    let r0 = h.r0;
    (
        d1.into_iter().map(|v| v / r0).collect(),
        d2.into_iter().map(|v| v / (r0 * r0)).collect(),
    )
}

/// Pointwise M₀(h) = (I - h L_Σ)⁻¹ = (1 + h/R0)⁻¹ on the circle.
pub fn m0(h_val: f64, r0: f64) -> Result<f64, InterfaceError> {
    let denom = 1.0 + h_val / r0;
    if denom <= 0.0 {
        return Err(InterfaceError::SingularGeometry(denom));
    }
    Ok(1.0 / denom)
}

/// Tangential component α(h) = M₀(h)·∇_Σ h = h_σ / (1 + h/R0).
pub fn alpha(h: &HeightField) -> Result<Vec<f64>, InterfaceError> {
    let (hs, _) = surface_derivatives(h);
    h.vals
        .iter()
        .zip(hs)
        .map(|(&hv, hsv)| m0(hv, h.r0).map(|m| m * hsv))
        .collect()
}

/// β(h) = (1 + |α(h)|²)^(-1/2) ∈ (0, 1].
pub fn beta(h: &HeightField) -> Result<Vec<f64>, InterfaceError> {
    Ok(alpha(h)?
        .into_iter()
        .map(|a| 1.0 / (1.0 + a * a).sqrt())
        .collect())
}

/// Unit outward normal of Γ_h at each sample: ν_Γ = β(h)(ν_Σ - α(h)·ŝ).
pub fn normal(h: &HeightField) -> Result<Vec<[f64; 2]>, InterfaceError> {
    let al = alpha(h)?;
    let n = h.len();
    let mut out = Vec::with_capacity(n);
    for (j, a) in al.into_iter().enumerate() {
        let s = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let (sin, cos) = s.sin_cos();
        let b = 1.0 / (1.0 + a * a).sqrt();
        // ν_Σ = (cos, sin), tangent ŝ = (-sin, cos)
        out.push([b * (cos + a * sin), b * (sin - a * cos)]);
    }
    Ok(out)
}

/// Mean curvature of the polar graph ρ = R0 + h(s):
/// ℋ = -(R² + 2R′² - R·R″) / (R² + R′²)^(3/2), derivatives in s (spectral).
pub fn mean_curvature(h: &HeightField) -> Vec<f64> {
    let d1 = spectral::derivative(&h.vals, 1);
    let d2 = spectral::derivative(&h.vals, 2);
    h.vals
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(&hv, (&rp, &rpp))| {
            let r = h.r0 + hv;
            let denom = (r * r + rp * rp).powf(1.5);
            -(r * r + 2.0 * rp * rp - r * rpp) / denom
        })
        .collect()
}

/// Surface heat semigroup e^{tΔ_Σ} acting on samples over Σ.
pub fn surface_semigroup(u0: &[f64], t: f64, r0: f64) -> Result<Vec<f64>, InterfaceError> {
    Ok(spectral::semigroup(u0, t, r0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn sgrid(n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
            .collect()
    }

    #[test]
    fn derivatives_of_constant_and_sine() {
        let h = HeightField::constant(2.0, 32, 0.7);
        let (hs, hss) = surface_derivatives(&h);
        assert!(hs.iter().all(|v| v.abs() < 1e-13));
        assert!(hss.iter().all(|v| v.abs() < 1e-13));

        let r0 = 1.5;
        let eps = 0.05;
        let h = HeightField::from_fn(r0, 64, |s| eps * s.sin());
        let (hs, _) = surface_derivatives(&h);
        for (j, &s) in sgrid(64).iter().enumerate() {
            assert!((hs[j] - eps * s.cos() / r0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_beltrami_eigenvalue() {
        let r0 = 1.3;
        let k = 4.0;
        let h = HeightField::from_fn(r0, 64, |s| (k * s).sin());
        let (_, hss) = surface_derivatives(&h);
        for (j, &s) in sgrid(64).iter().enumerate() {
            assert!((hss[j] + (k / r0) * (k / r0) * (k * s).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn m0_values_and_singularity() {
        assert_eq!(m0(0.0, 1.0).unwrap(), 1.0);
        assert!((m0(1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(m0(-1.0, 1.0).is_err());
        assert!(m0(-0.999999, 1.0).is_ok());
    }

    #[test]
    fn alpha_symbolic() {
        let r0 = 1.0;
        let eps = 0.07;
        let h = HeightField::from_fn(r0, 128, |s| eps * s.sin());
        let al = alpha(&h).unwrap();
        for (j, &s) in sgrid(128).iter().enumerate() {
            let expect = eps * s.cos() / (r0 + eps * s.sin());
            assert!((al[j] - expect).abs() < 1e-12);
        }
        let hc = HeightField::constant(1.0, 32, 0.3);
        assert!(alpha(&hc).unwrap().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn beta_identity_and_bounds() {
        let h = HeightField::from_fn(2.0, 64, |s| 0.2 * (2.0 * s).cos() + 0.1 * (5.0 * s).sin());
        let al = alpha(&h).unwrap();
        let be = beta(&h).unwrap();
        for (a, b) in al.iter().zip(&be) {
            assert!((b * b * (1.0 + a * a) - 1.0).abs() < 1e-12);
            assert!(*b > 0.0 && *b <= 1.0);
        }
        let hc = HeightField::constant(1.0, 16, 0.4);
        assert!(beta(&hc).unwrap().iter().all(|b| (b - 1.0).abs() < 1e-13));
    }

    #[test]
    fn normal_matches_polar_graph_formula() {
        let r0 = 1.0;
        let eps = 0.06;
        let n = 128;
        let h = HeightField::from_fn(r0, n, |s| eps * s.sin());
        let nu = normal(&h).unwrap();
        let d1 = spectral::derivative(&h.vals, 1);
        for (j, &s) in sgrid(n).iter().enumerate() {
            let r = r0 + h.vals[j];
            let rp = d1[j];
            let norm = (r * r + rp * rp).sqrt();
            let rhat = [s.cos(), s.sin()];
            let shat = [-s.sin(), s.cos()];
            let expect = [
                (r * rhat[0] - rp * shat[0]) / norm,
                (r * rhat[1] - rp * shat[1]) / norm,
            ];
            assert!((nu[j][0] - expect[0]).abs() < 1e-12);
            assert!((nu[j][1] - expect[1]).abs() < 1e-12);
            let len = (nu[j][0] * nu[j][0] + nu[j][1] * nu[j][1]).sqrt();
            assert!((len - 1.0).abs() < 1e-12);
        }
        // h == 0: the normal is the radial unit vector
        let h0 = HeightField::constant(r0, 32, 0.0);
        let nu0 = normal(&h0).unwrap();
        for (j, &s) in sgrid(32).iter().enumerate() {
            assert!((nu0[j][0] - s.cos()).abs() < 1e-13);
            assert!((nu0[j][1] - s.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn normal_reflection_antisymmetry() {
        let n = 64;
        let h = HeightField::from_fn(1.0, n, |s| 0.1 * (3.0 * s).sin());
        let href = HeightField::from_fn(1.0, n, |s| 0.1 * (3.0 * (-s)).sin());
        let nu = normal(&h).unwrap();
        let nur = normal(&href).unwrap();
        // reflecting h(s) -> h(-s) mirrors the normal field across the x-axis
        for j in 1..n {
            let m = n - j;
            assert!((nu[j][0] - nur[m][0]).abs() < 1e-11);
            assert!((nu[j][1] + nur[m][1]).abs() < 1e-11);
        }
    }

    #[test]
    fn curvature_of_circles() {
        for &r0 in &[0.5, 1.0, 2.0] {
            let h = HeightField::constant(r0, 32, 0.0);
            for v in mean_curvature(&h) {
                assert!((v + 1.0 / r0).abs() < 1e-13);
            }
        }
        let h = HeightField::constant(1.0, 32, 0.25);
        for v in mean_curvature(&h) {
            assert!((v + 1.0 / 1.25).abs() < 1e-13);
        }
    }

    #[test]
    fn curvature_linearization() {
        // (H(eps*phi) - H(0)) / eps -> (phi'' + phi)/R0^2 as eps -> 0;
        // for phi = sin(ks) this is (1 - k^2)/R0^2 sin(ks)
        let r0 = 1.4;
        let k = 3.0;
        let n = 128;
        let h0 = HeightField::constant(r0, n, 0.0);
        let base = mean_curvature(&h0);
        let mut prev_err = f64::INFINITY;
        for &eps in &[1e-3, 1e-4, 1e-5] {
            let h = HeightField::from_fn(r0, n, |s| eps * (k * s).sin());
            let hc = mean_curvature(&h);
            let mut max_err: f64 = 0.0;
            for (j, &s) in sgrid(n).iter().enumerate() {
                let lin = (hc[j] - base[j]) / eps;
                let expect = (1.0 - k * k) / (r0 * r0) * (k * s).sin();
                max_err = max_err.max((lin - expect).abs());
            }
            assert!(
                max_err < prev_err * 0.5 + 1e-9,
                "linearization not converging: {max_err}"
            );
            prev_err = max_err;
        }
    }

    // Independent oracle: curvature of the embedded curve by centered finite
    // differences on the physical points, κ = (x'y'' - y'x'')/(x'^2+y'^2)^{3/2},
    // with the graph sign flip.
    #[test]
    fn curvature_matches_embedded_curve_differences() {
        let r0 = 1.0;
        let mut err_prev = f64::INFINITY;
        for &n in &[64usize, 128, 256] {
            let h =
                HeightField::from_fn(r0, n, |s| 0.08 * (2.0 * s).cos() + 0.03 * (3.0 * s).sin());
            let hc = mean_curvature(&h);
            let ds = 2.0 * std::f64::consts::PI / n as f64;
            let pt = |j: usize| {
                let s = ds * j as f64;
                let r = r0 + h.vals[j % n];
                [r * s.cos(), r * s.sin()]
            };
            let mut max_err: f64 = 0.0;
            for j in 0..n {
                let pm = pt((j + n - 1) % n);
                let pp = pt((j + 1) % n);
                let p0 = pt(j);
                let xp = [(pp[0] - pm[0]) / (2.0 * ds), (pp[1] - pm[1]) / (2.0 * ds)];
                let xpp = [
                    (pp[0] - 2.0 * p0[0] + pm[0]) / (ds * ds),
                    (pp[1] - 2.0 * p0[1] + pm[1]) / (ds * ds),
                ];
                let num = xp[0] * xpp[1] - xp[1] * xpp[0];
                let den = (xp[0] * xp[0] + xp[1] * xp[1]).powf(1.5);
                let kappa_curve = num / den;
                max_err = max_err.max((hc[j] + kappa_curve).abs());
            }
            assert!(
                max_err < err_prev / 3.0 + 1e-12,
                "expected ~O(N^-2) improvement, n={n}, err={max_err}"
            );
            err_prev = max_err;
        }
    }

    #[test]
    fn curvature_rotation_equivariance() {
        let n = 64;
        let mut rng = SplitMix64::new(17);
        let coeffs: Vec<f64> = (0..4).map(|_| rng.uniform(-0.05, 0.05)).collect();
        let shape = |s: f64| {
            coeffs[0] * (2.0 * s).cos()
                + coeffs[1] * (3.0 * s).sin()
                + coeffs[2] * (4.0 * s).cos()
                + coeffs[3] * s.sin()
        };
        let h = HeightField::from_fn(1.0, n, shape);
        let hc = mean_curvature(&h);
        let arg = |v: &[f64]| {
            v.iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (i, &x)| {
                    if x > acc.1 {
                        (i, x)
                    } else {
                        acc
                    }
                })
        };
        let (imax, _) = arg(&hc);
        // rotate samples by k0 slots
        let k0 = 13;
        let mut rv = h.vals.clone();
        rv.rotate_left(k0);
        let hrot = HeightField::new(1.0, rv);
        let hcr = mean_curvature(&hrot);
        let (imax_r, _) = arg(&hcr);
        assert_eq!(
            (imax + n - k0) % n,
            imax_r,
            "argmax must rotate with the samples"
        );
    }

    #[test]
    fn semigroup_reexported_behaviour() {
        let u = vec![1.0; 16];
        assert_eq!(surface_semigroup(&u, 2.0, 1.0).unwrap(), u);
        assert!(surface_semigroup(&u, -1.0, 1.0).is_err());
    }
}
