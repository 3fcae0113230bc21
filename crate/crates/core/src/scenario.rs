//! Scenario construction and orchestration: initial data per scenario kind,
//! the compatibility gate, the time loop with per-step diagnostics, output
//! emission, the oracle comparison, and concurrent parameter sweeps.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig, ScenarioKind};
use crate::emit::{self, EmitError, TimeseriesRow};
use crate::fields::{BulkField, Grid, HeightField};
use crate::geometry::GeometryError;
use crate::interface;
use crate::materials::{MaterialError, MaterialLaws};
use crate::mms::ManufacturedCase;
use crate::radial::{self, OracleError, RadialConfig, RadialState};
use crate::rng::SplitMix64;
use crate::stepper::{self, AdvanceOpts, CompatReport, Forcing, State, StepError, Stepper};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("scenario construction: {0}")]
    Construction(String),
}

/// Why a run ended; maps onto the CLI exit statuses.
#[derive(Clone, Debug)]
pub enum RunOutcome {
    /// Exit 0.
    Clean,
    /// Exit 2: hard compatibility failure without --force.
    CompatAbort,
    /// Exit 3: mid-run halt (height cap, positivity, singular solve).
    Halted { step: usize, reason: String },
}

pub struct RunArtifacts {
    pub outcome: RunOutcome,
    pub compat: CompatReport,
    pub rows: Vec<TimeseriesRow>,
    /// (t, R_mean) trajectory for oracle comparisons.
    pub trajectory: Vec<(f64, f64)>,
    pub final_state: Option<State>,
}

/// Initial data of a scenario: grid, laws, and a consistent state at t = 0
/// (dth filled in later by `initial_velocity` inside `run_scenario`).
pub fn build_initial(
    config: &ScenarioConfig,
) -> Result<(Arc<Grid>, MaterialLaws, BulkField, HeightField), ScenarioError> {
    let chart = config.build_chart()?;
    let laws = config.build_laws()?;
    let grid = Grid::new(chart);
    let r0 = config.r0;
    let n_s = config.n_s;
    let theta_star = laws.equilibrium_temperature(r0)?;

    let (theta0, h0) = match config.kind {
        ScenarioKind::Equilibrium => (
            BulkField::constant(grid.clone(), theta_star),
            HeightField::constant(r0, n_s, 0.0),
        ),
        ScenarioKind::PerturbedCircle => {
            let mut rng = SplitMix64::new(config.seed);
            let phase = rng.uniform(0.0, std::f64::consts::TAU);
            let amp = config.amplitude;
            let mode = config.mode as f64;
            let h0 = HeightField::from_fn(r0, n_s, |s| amp * (mode * s + phase).cos());
            if !h0.within_cap(config.a) {
                return Err(ScenarioError::Construction(format!(
                    "perturbation amplitude {amp} exceeds the height cap a/3 = {}",
                    config.a / 3.0
                )));
            }
            let theta0 = perturbed_temperature(&grid, &laws, &h0, theta_star)?;
            (theta0, h0)
        }
        ScenarioKind::RadialMelt => {
            let (a1, a2) = (config.melt_amp1, config.melt_amp2);
            let theta0 = BulkField::from_fn(grid.clone(), |rho, _| {
                let phase = if rho <= r0 { 0 } else { 1 };
                let amp = if phase == 0 { a1 } else { a2 };
                theta_star
                    * (1.0 + amp * radial::melt_profile(phase, rho, config.r_in, r0, config.r_out))
            });
            (theta0, HeightField::constant(r0, n_s, 0.0))
        }
        ScenarioKind::Manufactured => {
            let case = ManufacturedCase::standard();
            let st = case.initial_state(&grid);
            (st.theta, st.h)
        }
    };
    Ok((grid, laws, theta0, h0))
}

/// Temperature field compatible with a perturbed interface.
///
/// γ ≡ 0: the interface trace solves the Gibbs–Thomson relation pointwise,
/// extended radially by a flat-at-Σ window. γ > 0: the trace stays at θ*,
/// and per-phase radial profiles impose the flux jump demanded by the
/// combined compatibility condition.
fn perturbed_temperature(
    grid: &Arc<Grid>,
    laws: &MaterialLaws,
    h0: &HeightField,
    theta_star: f64,
) -> Result<BulkField, ScenarioError> {
    let r0 = grid.chart.r0;
    let n_s = grid.n_s();
    let curvature = interface::mean_curvature(h0);
    if laws.gamma_is_zero() {
        // trace: [[psi]](theta(s)) = -sigma * H(h0(s)), Newton from theta*
        let mut trace = vec![theta_star; n_s];
        for j in 0..n_s {
            let target = -laws.sigma * curvature[j];
            let mut t = theta_star;
            for _ in 0..60 {
                let f = laws.psi_jump(t) - target;
                let fp = laws.dpsi_jump(t);
                if f.abs() < 1e-14 {
                    break;
                }
                t -= f / fp;
            }
            trace[j] = t;
        }
        // flat-at-interface window with zero slope at Σ and the walls
        let w_width = (r0 - grid.chart.r_in).min(grid.chart.r_out - r0) * 0.5;
        let theta0 = BulkField::from_fn(grid.clone(), |rho, s| {
            let x = (rho - r0) / w_width;
            let w = if x.abs() >= 1.0 {
                0.0
            } else {
                (1.0 - x * x) * (1.0 - x * x)
            };
            let j = (s / grid.ds).round() as usize % n_s;
            theta_star + (trace[j] - theta_star) * w
        });
        Ok(theta0)
    } else {
        // flux jump j(s) = GT·(l - GT)/γ with GT = [[psi(θ*)]] + σH(h0)
        let l_star = laws.latent_heat(theta_star)?;
        let gamma_star = laws.gamma(theta_star);
        let d1 = laws.d(theta_star, 0);
        let d2 = laws.d(theta_star, 1);
        let mut c1 = vec![0.0; n_s];
        let mut c2 = vec![0.0; n_s];
        for j in 0..n_s {
            let gt = laws.psi_jump(theta_star) + laws.sigma * curvature[j];
            let jump = gt * (l_star - gt) / gamma_star;
            c1[j] = -jump / (2.0 * d1);
            c2[j] = jump / (2.0 * d2);
        }
        let len1 = r0 - grid.chart.r_in;
        let len2 = grid.chart.r_out - r0;
        let theta0 = BulkField::from_fn(grid.clone(), |rho, s| {
            let j = (s / grid.ds).round() as usize % n_s;
            if rho <= r0 {
                // w(x) = len1 · x²(x-1): zero value at Σ, slope 1 there,
                // flat at the inner wall
                let x = (rho - grid.chart.r_in) / len1;
                theta_star + c1[j] * len1 * (x * x * (x - 1.0) + 0.0)
            } else {
                let y = (grid.chart.r_out - rho) / len2;
                theta_star - c2[j] * len2 * (y * y * (y - 1.0) + 0.0)
            }
        });
        Ok(theta0)
    }
}

/// Run one scenario end to end, writing artifacts under `out_dir`.
pub fn run_scenario(
    config: &ScenarioConfig,
    out_dir: &Path,
    force: bool,
    quiet: bool,
) -> Result<RunArtifacts, ScenarioError> {
    std::fs::create_dir_all(out_dir).map_err(|e| {
        ScenarioError::Emit(EmitError::Io {
            path: out_dir.display().to_string(),
            source: e,
        })
    })?;
    let (grid, laws, theta0, h0) = build_initial(config)?;

    let compat = stepper::check_compatibility(&theta0, &h0, &laws, config.tolerance)?;
    let mut provenance_extra = format!(
        "scenario = {}\ncompat: pass = {}, neumann = {:.3e}, flux_tail = {:.3e}\n",
        config.kind.as_str(),
        compat.pass,
        compat.neumann_resid,
        compat.flux_tail
    );
    for f in &compat.failures {
        provenance_extra.push_str(&format!("compat failure: {f}\n"));
    }
    if !compat.pass && !force {
        emit::write_provenance(out_dir, &config.serialize(), &provenance_extra)?;
        if !quiet {
            for f in &compat.failures {
                eprintln!("compatibility: {f}");
            }
        }
        return Ok(RunArtifacts {
            outcome: RunOutcome::CompatAbort,
            compat,
            rows: Vec::new(),
            trajectory: Vec::new(),
            final_state: None,
        });
    }

    let coeffs = stepper::freeze_coefficients(&theta0, &laws, config.smoothing)?;
    let dth0 = stepper::initial_velocity(&theta0, &h0, &laws)?;
    let mut state = State::new(theta0, h0, dth0);
    let mut stepper_obj = Stepper::new(grid.clone(), laws.clone(), coeffs);
    let opts = AdvanceOpts {
        dt: config.dt,
        inner_iters: config.inner_iters,
        tol: config.tolerance.min(1e-8),
    };

    // manufactured forcing when requested
    let case = ManufacturedCase::standard();
    let zeta_bulk = grid.chart.zeta();
    let zeta_stefan = grid.chart.zeta();
    let bulk = move |t: f64, rho: f64, s: f64| case.source_bulk(&zeta_bulk, t, rho, s);
    let case_g = ManufacturedCase::standard();
    let gt = move |t: f64, s: f64| case_g.source_gibbs_thomson(t, s);
    let case_q = ManufacturedCase::standard();
    let stefan = move |t: f64, s: f64| case_q.source_stefan(&zeta_stefan, t, s);
    let forcing = Forcing {
        bulk: &bulk,
        gibbs_thomson: &gt,
        stefan: &stefan,
    };
    let forcing = match config.kind {
        ScenarioKind::Manufactured => Some(&forcing),
        _ => None,
    };

    let mut rows = vec![emit::diagnostics_row(&state, &laws, 0.0)?];
    let mut trajectory = vec![(state.t, rows[0].diag.r_mean)];
    let mut outcome = RunOutcome::Clean;
    for step in 0..config.steps {
        match stepper_obj.advance(&state, &opts, forcing) {
            Ok((next, stats)) => {
                state = next;
                let row = emit::diagnostics_row(&state, &laws, stats.inner_residual)?;
                trajectory.push((state.t, row.diag.r_mean));
                rows.push(row);
                if config.snapshot_every > 0 && (step + 1) % config.snapshot_every == 0 {
                    let n = step + 1;
                    emit::write_snapshot(out_dir, n, &state)?;
                    emit::write_interface_snapshot(out_dir, n, &state)?;
                }
            }
            Err(
                e @ (StepError::HeightCapExceeded { .. }
                | StepError::NonpositiveTemperature(_)
                | StepError::Solve(_)),
            ) => {
                let reason = e.to_string();
                if !quiet {
                    eprintln!("halt at step {step}: {reason}");
                }
                provenance_extra.push_str(&format!("halt at step {step}: {reason}\n"));
                outcome = RunOutcome::Halted { step, reason };
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }

    emit::write_timeseries(out_dir, &rows)?;
    emit::write_provenance(out_dir, &config.serialize(), &provenance_extra)?;
    Ok(RunArtifacts {
        outcome,
        compat,
        rows,
        trajectory,
        final_state: Some(state),
    })
}

/// Run a radial_melt configuration through the main solver and through the
/// independent radial oracle at `refine`-fold resolution; returns the
/// comparison rows and the max relative radius error.
pub fn oracle_compare(
    config: &ScenarioConfig,
    out_dir: &Path,
    refine: usize,
) -> Result<(Vec<(f64, f64, f64)>, f64), ScenarioError> {
    if config.kind != ScenarioKind::RadialMelt {
        return Err(ScenarioError::Construction(
            "oracle comparison needs scenario.kind = radial_melt".to_string(),
        ));
    }
    let artifacts = run_scenario(config, out_dir, false, true)?;
    if matches!(artifacts.outcome, RunOutcome::CompatAbort) {
        return Err(ScenarioError::Construction(
            "radial_melt data failed the compatibility gate".to_string(),
        ));
    }
    let laws = config.build_laws()?;
    let theta_star = laws.equilibrium_temperature(config.r0)?;
    let rcfg = RadialConfig {
        r_in: config.r_in,
        r_out: config.r_out,
        m1: config.n_r1 * refine,
        m2: config.n_r2 * refine,
        dt: config.dt / refine as f64,
        steps: config.steps * refine,
        newton_tol: 1e-12,
        newton_max: 30,
    };
    let init = RadialState {
        r: config.r0,
        theta1: (0..=rcfg.m1)
            .map(|i| {
                let rho = rcfg.r_in + (config.r0 - rcfg.r_in) * i as f64 / rcfg.m1 as f64;
                theta_star
                    * (1.0
                        + config.melt_amp1
                            * radial::melt_profile(0, rho, rcfg.r_in, config.r0, rcfg.r_out))
            })
            .collect(),
        theta2: (0..=rcfg.m2)
            .map(|i| {
                let rho = config.r0 + (rcfg.r_out - config.r0) * i as f64 / rcfg.m2 as f64;
                theta_star
                    * (1.0
                        + config.melt_amp2
                            * radial::melt_profile(1, rho, rcfg.r_in, config.r0, rcfg.r_out))
            })
            .collect(),
        t: 0.0,
    };
    let oracle = radial::solve_radial(&laws, &rcfg, init)?;
    let max_rel = radial::compare(&artifacts.trajectory, &oracle);
    let rows: Vec<(f64, f64, f64)> = artifacts
        .trajectory
        .iter()
        .map(|&(t, rm)| {
            let ro = interp(&oracle.times, &oracle.radii, t);
            (t, rm, ro)
        })
        .collect();
    emit::write_comparison(out_dir, &rows, max_rel)?;
    Ok((rows, max_rel))
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= *xs.last().unwrap() {
        return *ys.last().unwrap();
    }
    let mut lo = 0;
    let mut hi = xs.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if xs[mid] <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] * (1.0 - w) + ys[hi] * w
}

/// Run several configurations concurrently, each into its own directory
/// under `out_root`. `max_threads` of 0 means one thread per run.
pub fn sweep(
    configs: &[(String, ScenarioConfig)],
    out_root: &Path,
    force: bool,
    max_threads: usize,
) -> Vec<(String, Result<RunOutcome, String>)> {
    let limit = if max_threads == 0 {
        configs.len().max(1)
    } else {
        max_threads
    };
    let mut results: Vec<(String, Result<RunOutcome, String>)> = Vec::new();
    for chunk in configs.chunks(limit) {
        let mut handles = Vec::new();
        for (name, cfg) in chunk {
            let name = name.clone();
            let cfg = cfg.clone();
            let dir: PathBuf = out_root.join(&name);
            handles.push(std::thread::spawn(move || {
                let res = run_scenario(&cfg, &dir, force, true)
                    .map(|a| a.outcome)
                    .map_err(|e| e.to_string());
                (name, res)
            }));
        }
        for h in handles {
            results.push(h.join().expect("sweep worker panicked"));
        }
    }
    results
}
