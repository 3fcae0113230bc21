//! Shared test support: independent oracles and seeded smooth test data.
//!
//! The deformed-grid oracle evaluates -div(d(θ)∇θ) by metric finite
//! differences directly on the physical (deformed) nodes Ξ_h(grid), fully
//! independently of the operator-assembly path in the library.

use std::sync::Arc;

use stefan_core::fields::{BulkField, Grid, HeightField};
use stefan_core::materials::MaterialLaws;
use stefan_core::rng::SplitMix64;

/// A random band-limited height field with a deformation well inside the
/// diffeomorphism regime.
pub fn random_height(rng: &mut SplitMix64, r0: f64, n_s: usize) -> HeightField {
    let amps: Vec<(f64, f64, f64)> = (1..=3)
        .map(|k| {
            (
                k as f64,
                rng.uniform(-0.008, 0.008) * r0,
                rng.uniform(0.0, std::f64::consts::TAU),
            )
        })
        .collect();
    HeightField::from_fn(r0, n_s, |s| {
        amps.iter().map(|&(k, a, ph)| a * (k * s + ph).cos()).sum()
    })
}

/// A random smooth positive temperature field (globally smooth; the bulk
/// operator test does not need an interfacial kink).
pub struct SmoothTheta {
    pub base: f64,
    pub modes: Vec<(f64, f64, f64, f64)>, // (angular k, amp, phase, radial frequency)
}

pub fn random_theta(rng: &mut SplitMix64) -> SmoothTheta {
    let modes = (0..3)
        .map(|k| {
            (
                k as f64,
                rng.uniform(-0.08, 0.08),
                rng.uniform(0.0, std::f64::consts::TAU),
                rng.uniform(0.5, 2.0),
            )
        })
        .collect();
    SmoothTheta { base: 1.0, modes }
}

impl SmoothTheta {
    pub fn eval(&self, rho: f64, s: f64) -> f64 {
        let mut v = self.base;
        for &(k, a, ph, w) in &self.modes {
            v += a * (k * s + ph).cos() * (w * rho).sin();
        }
        v
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> BulkField {
        BulkField::from_fn(grid.clone(), |rho, s| self.eval(rho, s))
    }
}

/// Metric finite-difference evaluation of -div(d(θ)∇θ) on the deformed grid,
/// one phase block at a time: first pass builds the physical flux d(θ)∇θ on
/// every node of the block, second pass takes its physical divergence. Both
/// passes use index-space derivatives mapped through the local mesh Jacobian.
pub fn deformed_grid_divergence(
    grid: &Arc<Grid>,
    theta: &BulkField,
    h: &HeightField,
    laws: &MaterialLaws,
    phase: usize,
) -> Vec<f64> {
    let n_s = grid.n_s();
    let rows = grid.block_rows(phase);
    let zeta = grid.chart.zeta();

    // physical node coordinates of this block
    let mut x = vec![[0.0f64; 2]; rows * n_s];
    let mut tv = vec![0.0f64; rows * n_s];
    for bi in 0..rows {
        let i = grid.block_to_radial(phase, bi);
        let zr = zeta.value(grid.r_of_row(i));
        for j in 0..n_s {
            let rho_def = grid.rho[i] + zr * h.vals[j];
            let (sin, cos) = grid.s[j].sin_cos();
            x[bi * n_s + j] = [rho_def * cos, rho_def * sin];
            tv[bi * n_s + j] = theta.at(i, j);
        }
    }

    // index-space derivative: one-sided (2nd order) at radial block edges,
    // centered inside; always centered (periodic) in the angular index
    let du = |f: &dyn Fn(usize, usize) -> f64, bi: usize, j: usize| -> f64 {
        if bi == 0 {
            (-3.0 * f(0, j) + 4.0 * f(1, j) - f(2, j)) / 2.0
        } else if bi == rows - 1 {
            (3.0 * f(rows - 1, j) - 4.0 * f(rows - 2, j) + f(rows - 3, j)) / 2.0
        } else {
            (f(bi + 1, j) - f(bi - 1, j)) / 2.0
        }
    };
    let dv = |f: &dyn Fn(usize, usize) -> f64, bi: usize, j: usize| -> f64 {
        (f(bi, (j + 1) % n_s) - f(bi, (j + n_s - 1) % n_s)) / 2.0
    };

    // physical gradient of a scalar through the mesh Jacobian
    let grad_phys = |f: &dyn Fn(usize, usize) -> f64, bi: usize, j: usize| -> [f64; 2] {
        let x1 = |b: usize, jj: usize| x[b * n_s + jj][0];
        let x2 = |b: usize, jj: usize| x[b * n_s + jj][1];
        let j11 = du(&x1, bi, j);
        let j12 = dv(&x1, bi, j);
        let j21 = du(&x2, bi, j);
        let j22 = dv(&x2, bi, j);
        let det = j11 * j22 - j12 * j21;
        let fu = du(f, bi, j);
        let fv = dv(f, bi, j);
        // J^{-T} [fu, fv]
        [(j22 * fu - j21 * fv) / det, (-j12 * fu + j11 * fv) / det]
    };

    // pass 1: flux components at every block node
    let theta_at = |bi: usize, j: usize| tv[bi * n_s + j];
    let mut w1 = vec![0.0; rows * n_s];
    let mut w2 = vec![0.0; rows * n_s];
    for bi in 0..rows {
        for j in 0..n_s {
            let g = grad_phys(&theta_at, bi, j);
            let d = laws.d(tv[bi * n_s + j], phase);
            w1[bi * n_s + j] = d * g[0];
            w2[bi * n_s + j] = d * g[1];
        }
    }

    // pass 2: -divergence of the flux
    let w1_at = |bi: usize, j: usize| w1[bi * n_s + j];
    let w2_at = |bi: usize, j: usize| w2[bi * n_s + j];
    let mut out = vec![0.0; rows * n_s];
    for bi in 0..rows {
        for j in 0..n_s {
            let g1 = grad_phys(&w1_at, bi, j);
            let g2 = grad_phys(&w2_at, bi, j);
            out[bi * n_s + j] = -(g1[0] + g2[1]);
        }
    }
    out
}

/// Largest absolute discrepancy between the library's transformed bulk
/// operator and the deformed-grid oracle on the interior of both blocks
/// (a margin keeps the comparison away from one-sided stencil layers).
pub fn transform_a_oracle_error(
    grid: &Arc<Grid>,
    theta: &BulkField,
    h: &HeightField,
    laws: &MaterialLaws,
    margin: usize,
) -> f64 {
    let def = stefan_core::hanzawa::upsilon(grid, h, None).expect("deformation in range");
    let mf = stefan_core::hanzawa::m_fields(&def, h).expect("m-fields");
    let a = stefan_core::hanzawa::transform_a(theta, &mf, laws);
    let n_s = grid.n_s();
    let mut worst: f64 = 0.0;
    for phase in 0..2 {
        let oracle = deformed_grid_divergence(grid, theta, h, laws, phase);
        let rows = grid.block_rows(phase);
        for bi in margin..rows - margin {
            for j in 0..n_s {
                let diff = (a.at(phase, bi, j) - oracle[bi * n_s + j]).abs();
                worst = worst.max(diff);
            }
        }
    }
    worst
}

/// Least-squares slope of log2(err) against log2(n): the observed order.
pub fn observed_order(ns: &[usize], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(errs)
        .map(|(&n, &e)| ((n as f64).log2(), e.max(1e-300).log2()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    -(n * sxy - sx * sy) / (n * sxx - sx * sx)
}
