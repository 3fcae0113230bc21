//! Discrete fields on the fixed two-block polar tensor grid.
//!
//! Phase 1 occupies radial rows 0..=ifc (ρ from R_in to R0), phase 2 rows
//! ifc..=rows-1 (R0 to R_out). The interface row `ifc` is stored once: the
//! temperature is continuous across Σ, while its radial derivatives are
//! one-sided per phase (the flux jumps).

use std::sync::Arc;

use thiserror::Error;

use crate::geometry::TubularChart;
use crate::spectral;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("temperature must stay positive: min value {0:.6e}")]
    NonpositiveTemperature(f64),
    #[error("field length {got} does not match grid ({want})")]
    ShapeMismatch { got: usize, want: usize },
}

/// Geometry-derived grid layout shared by all fields of a run.
#[derive(Clone, Debug)]
pub struct Grid {
    pub chart: TubularChart,
    /// Radial coordinate of every row (length `rows()`).
    pub rho: Vec<f64>,
    /// Angular samples s_j = 2πj/N_s.
    pub s: Vec<f64>,
    pub dr1: f64,
    pub dr2: f64,
    pub ds: f64,
    /// Radial index of the interface row (= N_r1).
    pub ifc: usize,
}

impl Grid {
    pub fn new(chart: TubularChart) -> Arc<Grid> {
        let n1 = chart.n_r1;
        let n2 = chart.n_r2;
        let dr1 = (chart.r0 - chart.r_in) / n1 as f64;
        let dr2 = (chart.r_out - chart.r0) / n2 as f64;
        let mut rho = Vec::with_capacity(n1 + n2 + 1);
        for i in 0..=n1 {
            rho.push(chart.r_in + dr1 * i as f64);
        }
        for i in 1..=n2 {
            rho.push(chart.r0 + dr2 * i as f64);
        }
        // pin the interface coordinate exactly
        rho[n1] = chart.r0;
        let ds = 2.0 * std::f64::consts::PI / chart.n_s as f64;
        let s = (0..chart.n_s).map(|j| ds * j as f64).collect();
        Arc::new(Grid {
            ifc: n1,
            rho,
            s,
            dr1,
            dr2,
            ds,
            chart,
        })
    }

    pub fn rows(&self) -> usize {
        self.chart.n_r1 + self.chart.n_r2 + 1
    }

    pub fn n_s(&self) -> usize {
        self.chart.n_s
    }

    pub fn len(&self) -> usize {
        self.rows() * self.n_s()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rows() && j < self.n_s());
        i * self.n_s() + j
    }

    /// Signed distance of a radial row to Σ.
    pub fn r_of_row(&self, i: usize) -> f64 {
        self.rho[i] - self.chart.r0
    }

    /// Rows of one phase block (interface row included in both).
    pub fn block_rows(&self, phase: usize) -> usize {
        if phase == 0 {
            self.chart.n_r1 + 1
        } else {
            self.chart.n_r2 + 1
        }
    }

    /// Map a block row index to the shared radial row index.
    pub fn block_to_radial(&self, phase: usize, bi: usize) -> usize {
        if phase == 0 {
            bi
        } else {
            self.ifc + bi
        }
    }

    pub fn dr(&self, phase: usize) -> f64 {
        if phase == 0 {
            self.dr1
        } else {
            self.dr2
        }
    }
}

/// Scalar field on the shared grid (single interface value: [[·]] = 0).
#[derive(Clone, Debug)]
pub struct BulkField {
    pub grid: Arc<Grid>,
    pub vals: Vec<f64>,
}

impl BulkField {
    pub fn new(grid: Arc<Grid>, vals: Vec<f64>) -> Result<Self, FieldError> {
        if vals.len() != grid.len() {
            return Err(FieldError::ShapeMismatch {
                got: vals.len(),
                want: grid.len(),
            });
        }
        Ok(BulkField { grid, vals })
    }

    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut vals = Vec::with_capacity(grid.len());
        for i in 0..grid.rows() {
            for j in 0..grid.n_s() {
                vals.push(f(grid.rho[i], grid.s[j]));
            }
        }
        BulkField { grid, vals }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        BulkField {
            grid,
            vals: vec![c; n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.vals[self.grid.idx(i, j)]
    }

    /// Values on the interface row.
    pub fn interface_trace(&self) -> Vec<f64> {
        let i = self.grid.ifc;
        (0..self.grid.n_s()).map(|j| self.at(i, j)).collect()
    }

    pub fn validate_positive(&self) -> Result<(), FieldError> {
        let min = self.vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(FieldError::NonpositiveTemperature(min));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &BulkField) -> f64 {
        self.vals
            .iter()
            .zip(&other.vals)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-phase field with the interface row duplicated (one-sided quantities:
/// derivatives of the temperature, phase-wise coefficients).
#[derive(Clone, Debug)]
pub struct PhaseField {
    pub grid: Arc<Grid>,
    /// Block values, row-major `(block_rows(phase) × n_s)`.
    pub p: [Vec<f64>; 2],
}

impl PhaseField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let b0 = grid.block_rows(0) * grid.n_s();
        let b1 = grid.block_rows(1) * grid.n_s();
        PhaseField {
            grid,
            p: [vec![0.0; b0], vec![0.0; b1]],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(usize, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid.clone());
        for phase in 0..2 {
            for bi in 0..grid.block_rows(phase) {
                let rho = grid.rho[grid.block_to_radial(phase, bi)];
                for j in 0..grid.n_s() {
                    out.p[phase][bi * grid.n_s() + j] = f(phase, rho, s_of(&grid, j));
                }
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, phase: usize, bi: usize, j: usize) -> f64 {
        self.p[phase][bi * self.grid.n_s() + j]
    }

    #[inline]
    pub fn set(&mut self, phase: usize, bi: usize, j: usize, v: f64) {
        self.p[phase][bi * self.grid.n_s() + j] = v;
    }

    /// One-sided interface values of a phase (last row of block 0, first of
    /// block 1).
    pub fn interface_row(&self, phase: usize) -> &[f64] {
        let n_s = self.grid.n_s();
        if phase == 0 {
            let start = (self.grid.block_rows(0) - 1) * n_s;
            &self.p[0][start..start + n_s]
        } else {
            &self.p[1][0..n_s]
        }
    }

    /// Jump [[·]] = (phase 2 value) - (phase 1 value) at the interface.
    pub fn interface_jump(&self) -> Vec<f64> {
        self.interface_row(1)
            .iter()
            .zip(self.interface_row(0))
            .map(|(b, a)| b - a)
            .collect()
    }
}

fn s_of(grid: &Grid, j: usize) -> f64 {
    grid.s[j]
}

/// All partial-derivative tables of a bulk field, one-sided per phase in the
/// radial direction (no differencing across Σ), spectral in s.
pub struct BulkDerivs {
    pub t_r: PhaseField,
    pub t_rr: PhaseField,
    pub t_s: PhaseField,
    pub t_ss: PhaseField,
    pub t_rs: PhaseField,
}

/// Second-order radial first derivative of one block column.
fn radial_first(col: &[f64], h: f64) -> Vec<f64> {
    let n = col.len();
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * col[0] + 4.0 * col[1] - col[2]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (col[i + 1] - col[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * col[n - 1] - 4.0 * col[n - 2] + col[n - 3]) / (2.0 * h);
    out
}

/// Second-order radial second derivative of one block column.
fn radial_second(col: &[f64], h: f64) -> Vec<f64> {
    let n = col.len();
    let h2 = h * h;
    let mut out = vec![0.0; n];
    out[0] = (2.0 * col[0] - 5.0 * col[1] + 4.0 * col[2] - col[3]) / h2;
    for i in 1..n - 1 {
        out[i] = (col[i + 1] - 2.0 * col[i] + col[i - 1]) / h2;
    }
    out[n - 1] = (2.0 * col[n - 1] - 5.0 * col[n - 2] + 4.0 * col[n - 3] - col[n - 4]) / h2;
    out
}

pub fn derivatives(f: &BulkField) -> BulkDerivs {
    let grid = &f.grid;
    let n_s = grid.n_s();
    let mut t_r = PhaseField::zeros(f.grid.clone());
    let mut t_rr = PhaseField::zeros(f.grid.clone());
    let mut t_s = PhaseField::zeros(f.grid.clone());
    let mut t_ss = PhaseField::zeros(f.grid.clone());
    let mut t_rs = PhaseField::zeros(f.grid.clone());

    for phase in 0..2 {
        let rows = grid.block_rows(phase);
        let h = grid.dr(phase);
        // radial derivatives per column
        let mut col = vec![0.0; rows];
        for j in 0..n_s {
            for bi in 0..rows {
                col[bi] = f.at(grid.block_to_radial(phase, bi), j);
            }
            let d1 = radial_first(&col, h);
            let d2 = radial_second(&col, h);
            for bi in 0..rows {
                t_r.set(phase, bi, j, d1[bi]);
                t_rr.set(phase, bi, j, d2[bi]);
            }
        }
        // angular derivatives per row (spectral), plus the mixed derivative
        let mut row = vec![0.0; n_s];
        for bi in 0..rows {
            for (j, r) in row.iter_mut().enumerate() {
                *r = f.at(grid.block_to_radial(phase, bi), j);
            }
            let d1 = spectral::derivative(&row, 1);
            let d2 = spectral::derivative(&row, 2);
            for j in 0..n_s {
                t_s.set(phase, bi, j, d1[j]);
                t_ss.set(phase, bi, j, d2[j]);
            }
            for (j, r) in row.iter_mut().enumerate() {
                *r = t_r.at(phase, bi, j);
            }
            let drs = spectral::derivative(&row, 1);
            for j in 0..n_s {
                t_rs.set(phase, bi, j, drs[j]);
            }
        }
    }
    BulkDerivs {
        t_r,
        t_rr,
        t_s,
        t_ss,
        t_rs,
    }
}

/// One-sided second-order normal (radial) derivatives at the interface,
/// per phase: `(∂_ρ θ from phase 1, ∂_ρ θ from phase 2)`.
pub fn interface_normal_derivs(f: &BulkField) -> (Vec<f64>, Vec<f64>) {
    let grid = &f.grid;
    let n_s = grid.n_s();
    let ifc = grid.ifc;
    let mut from1 = vec![0.0; n_s];
    let mut from2 = vec![0.0; n_s];
    for j in 0..n_s {
        from1[j] =
            (3.0 * f.at(ifc, j) - 4.0 * f.at(ifc - 1, j) + f.at(ifc - 2, j)) / (2.0 * grid.dr1);
        from2[j] =
            (-3.0 * f.at(ifc, j) + 4.0 * f.at(ifc + 1, j) - f.at(ifc + 2, j)) / (2.0 * grid.dr2);
    }
    (from1, from2)
}

/// Radial derivative of a field that is smooth across the interface (e.g. the
/// deformation Jacobian entries), on the shared grid. Handles the spacing
/// change at Σ with second-order nonuniform weights.
pub fn radial_deriv_smooth(grid: &Grid, vals: &[f64]) -> Vec<f64> {
    let rows = grid.rows();
    let n_s = grid.n_s();
    let mut out = vec![0.0; vals.len()];
    for j in 0..n_s {
        for i in 0..rows {
            let v = |k: usize| vals[k * n_s + j];
            out[i * n_s + j] = if i == 0 {
                let h = grid.rho[1] - grid.rho[0];
                // uniform inside the first block
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
            } else if i == rows - 1 {
                let h = grid.rho[rows - 1] - grid.rho[rows - 2];
                (3.0 * v(rows - 1) - 4.0 * v(rows - 2) + v(rows - 3)) / (2.0 * h)
            } else {
                let hm = grid.rho[i] - grid.rho[i - 1];
                let hp = grid.rho[i + 1] - grid.rho[i];
                (hm * hm * v(i + 1) - hp * hp * v(i - 1) + (hp * hp - hm * hm) * v(i))
                    / (hm * hp * (hm + hp))
            };
        }
    }
    out
}

/// Spectral angular derivative of a shared-grid field, row by row.
pub fn angular_deriv(grid: &Grid, vals: &[f64], order: u32) -> Vec<f64> {
    let rows = grid.rows();
    let n_s = grid.n_s();
    let mut out = vec![0.0; vals.len()];
    for i in 0..rows {
        let row = &vals[i * n_s..(i + 1) * n_s];
        let d = spectral::derivative(row, order);
        out[i * n_s..(i + 1) * n_s].copy_from_slice(&d);
    }
    out
}

/// Periodic samples of the interface height over Σ.
#[derive(Clone, Debug)]
pub struct HeightField {
    pub r0: f64,
    pub vals: Vec<f64>,
}

impl HeightField {
    pub fn new(r0: f64, vals: Vec<f64>) -> Self {
        HeightField { r0, vals }
    }

    pub fn constant(r0: f64, n: usize, c: f64) -> Self {
        HeightField {
            r0,
            vals: vec![c; n],
        }
    }

    pub fn from_fn(r0: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> Self {
        let vals = (0..n)
            .map(|j| f(2.0 * std::f64::consts::PI * j as f64 / n as f64))
            .collect();
        HeightField { r0, vals }
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.vals.iter().sum::<f64>() / self.vals.len() as f64
    }

    /// The height cap sup|h| < a/3 that keeps Γ_h inside the ζ ≡ 1 plateau.
    pub fn within_cap(&self, a: f64) -> bool {
        self.max_abs() < a / 3.0
    }
}
