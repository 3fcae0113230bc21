//! Degenerate limit: identical free energies (zero latent heat, zero free
//! energy jump) and vanishing surface tension reduce the coupled system to
//! plain two-phase heat conduction with a continuous flux: h must stay
//! pinned at zero while θ follows the analytic heat solution.
//!
//! A Neumann-compatible cosine profile is the reference; the polar metric
//! term is injected as a closed-form bulk source so the reference is exact.

use std::sync::Arc;

use stefan_core::fields::{BulkField, Grid, HeightField};
use stefan_core::geometry::TubularChart;
use stefan_core::materials::{Coefficient, FreeEnergy, MaterialLaws};
use stefan_core::stepper::{self, AdvanceOpts, Forcing, State, Stepper};

fn identical_phase_laws() -> MaterialLaws {
    let psi = FreeEnergy {
        f: Arc::new(|t: f64| t - t * t.ln()),
        df: Arc::new(|t: f64| -t.ln()),
        d2f: Arc::new(|t: f64| -1.0 / t),
    };
    MaterialLaws::from_parts(
        [psi.clone(), psi],
        [Coefficient::constant(1.0), Coefficient::constant(1.0)],
        Some(Coefficient::constant(1.0)),
        1e-12, // surface tension switched off up to the positivity floor
        (0.3, 3.0),
    )
    .unwrap()
}

fn run_case(n_s: usize, n_r: usize, dt: f64, steps: usize) -> (f64, f64) {
    let laws = identical_phase_laws();
    let grid = Grid::new(TubularChart::with_defaults(1.0, n_s, n_r, n_r).unwrap());
    let (r_in, r_out) = (grid.chart.r_in, grid.chart.r_out);
    let len = r_out - r_in;
    let w = std::f64::consts::PI / len;
    let amp = 0.2;
    let base = 1.2;
    let mu = w * w; // d = kappa = 1
    let theta_ex = move |t: f64, rho: f64| base + amp * (-mu * t).exp() * (w * (rho - r_in)).cos();

    let theta0 = BulkField::from_fn(grid.clone(), |rho, _| theta_ex(0.0, rho));
    let h0 = HeightField::constant(1.0, n_s, 0.0);
    let dth0 = stepper::initial_velocity(&theta0, &h0, &laws).unwrap();
    let coeffs = stepper::freeze_coefficients(&theta0, &laws, 0).unwrap();
    let mut st = Stepper::new(grid.clone(), laws.clone(), coeffs);

    // metric correction source: the cosine profile solves the slab heat
    // equation; the polar operator adds d·θ_ρ/ρ
    let bulk =
        move |t: f64, rho: f64, _s: f64| w * amp * (-mu * t).exp() * (w * (rho - r_in)).sin() / rho;
    let zero = |_t: f64, _s: f64| 0.0;
    let forcing = Forcing {
        bulk: &bulk,
        gibbs_thomson: &zero,
        stefan: &zero,
    };

    let mut state = State::new(theta0, h0, dth0);
    let opts = AdvanceOpts {
        dt,
        inner_iters: 2,
        tol: 1e-12,
    };
    for _ in 0..steps {
        let (next, _) = st.advance(&state, &opts, Some(&forcing)).unwrap();
        state = next;
    }
    let mut err: f64 = 0.0;
    for i in 0..grid.rows() {
        for j in 0..grid.n_s() {
            err = err.max((state.theta.at(i, j) - theta_ex(state.t, grid.rho[i])).abs());
        }
    }
    (err, state.h.max_abs())
}

#[test]
fn identical_phases_follow_bulk_heat_flow() {
    let (err1, h1) = run_case(16, 24, 4e-3, 25);
    let (err2, h2) = run_case(16, 48, 2e-3, 50);
    println!("degenerate heat flow: coarse err {err1:.3e} (|h| {h1:.1e}), fine err {err2:.3e} (|h| {h2:.1e})");
    assert!(h1 < 1e-9 && h2 < 1e-9, "interface must stay put");
    assert!(err1 < 5e-3, "coarse run tracks the analytic solution");
    assert!(
        err2 < 0.6 * err1,
        "refining dt and the grid improves the error at O(dt + grid^2)"
    );
}
