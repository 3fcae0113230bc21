//! Command-line front end: scenario runs, initial-data checks, the
//! Lopatinskii–Shapiro scanner, the translation-family smoothness probe, the
//! radial-oracle comparison, and concurrent sweeps.
//!
//! Exit codes for `run`: 0 clean, 1 usage/config error, 2 compatibility
//! abort, 3 mid-run halt (height cap / positivity / singular solve).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stefan_core::config::{parse_config, ScenarioConfig};
use stefan_core::diffeo::{smoothness_probe, ParamDiffeo, SpaceTimeField};
use stefan_core::emit;
use stefan_core::ls_check::{scan, FrozenCoefficients, ScanGrid};
use stefan_core::scenario::{self, RunOutcome};

#[derive(Parser)]
#[command(
    name = "stefan",
    version,
    about = "two-phase Stefan problem toolkit on a fixed annulus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step on even when the compatibility check fails.
    #[arg(long)]
    force: bool,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario: compatibility gate, coefficient freeze, time loop,
    /// CSV emission.
    Run(RunArgs),
    /// Evaluate the initial-data compatibility conditions and report
    /// per-condition residuals without stepping.
    CheckCompat {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Scan the frozen-coefficient boundary-symbol determinant over the
    /// default (ξ, λ) grid and write a one-row summary CSV.
    LsScan {
        /// Tangential dimension of the model problem.
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        kappa0: f64,
        #[arg(long, default_value_t = 1.0)]
        d0: f64,
        #[arg(long, default_value_t = 1.0)]
        l0: f64,
        #[arg(long, default_value_t = 1.0)]
        l2: f64,
        /// Isotropic scale of the bulk symbol matrix P = p·I.
        #[arg(long, default_value_t = 1.0)]
        p_scale: f64,
        /// Isotropic scale of the surface symbol matrix S = s·I.
        #[arg(long, default_value_t = 1.0)]
        s_scale: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also dump every grid sample (variant, xi, lambda, |det|).
        #[arg(long)]
        full_grid: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// Pull snapshots of a finished run through the localized space-time
    /// translation family and emit the divided-difference table.
    Probe {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding snapshot_<n>.csv files from a previous run.
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a radial_melt scenario and compare the interface radius against
    /// the independent front-tracking oracle at higher resolution.
    OracleCompare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Oracle resolution multiplier (mesh and time step).
        #[arg(long, default_value_t = 8)]
        refine: usize,
        #[arg(long)]
        quiet: bool,
    },
    /// Run several configs concurrently, one output directory per config.
    /// STEFAN_THREADS caps the concurrency (0 or unset: one thread each).
    Sweep {
        /// Configuration files; each runs into out/<file-stem>/.
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        ExitCode::from(1)
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::CheckCompat { config, quiet } => cmd_check_compat(config, quiet),
        Command::LsScan {
            m,
            kappa0,
            d0,
            l0,
            l2,
            p_scale,
            s_scale,
            out,
            full_grid,
            quiet,
        } => cmd_ls_scan(
            m, kappa0, d0, l0, l2, p_scale, s_scale, out, full_grid, quiet,
        ),
        Command::Probe {
            config,
            run_dir,
            out,
            quiet,
        } => cmd_probe(config, run_dir, out, quiet),
        Command::OracleCompare {
            config,
            out,
            refine,
            quiet,
        } => cmd_oracle_compare(config, out, refine, quiet),
        Command::Sweep {
            configs,
            out,
            force,
        } => cmd_sweep(configs, out, force),
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let out_dir = args.out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    match scenario::run_scenario(&cfg, &out_dir, args.force, args.quiet) {
        Ok(artifacts) => match artifacts.outcome {
            RunOutcome::Clean => {
                if !args.quiet {
                    let last = artifacts.rows.last().unwrap();
                    println!(
                        "done: {} steps, t = {}, R_mean = {:.6}, E drift = {:.3e}",
                        artifacts.rows.len() - 1,
                        last.diag.t,
                        last.diag.r_mean,
                        (last.diag.e_total - artifacts.rows[0].diag.e_total).abs()
                            / artifacts.rows[0].diag.e_total.abs()
                    );
                }
                ExitCode::from(0)
            }
            RunOutcome::CompatAbort => {
                eprintln!("compatibility check failed (use --force to run anyway)");
                ExitCode::from(2)
            }
            RunOutcome::Halted { step, reason } => {
                eprintln!("run halted at step {step}: {reason}");
                ExitCode::from(3)
            }
        },
        // invalid initial data (e.g. a perturbation past the height cap) is
        // an admissibility failure like a compatibility abort
        Err(e @ scenario::ScenarioError::Construction(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_check_compat(config: PathBuf, quiet: bool) -> ExitCode {
    let cfg = match load_config(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (_grid, laws, theta0, h0) = match scenario::build_initial(&cfg) {
        Ok(parts) => parts,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let rep = match stefan_core::stepper::check_compatibility(&theta0, &h0, &laws, cfg.tolerance) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if !quiet {
        println!(
            "gamma regime: {}",
            if rep.gamma_zero {
                "gamma == 0"
            } else {
                "gamma > 0"
            }
        );
        println!("outer-boundary flux residual: {:.3e}", rep.neumann_resid);
        if let Some(gt) = rep.gibbs_thomson_resid {
            println!("Gibbs-Thomson residual: {gt:.3e}");
        }
        if let Some(cb) = rep.combined_resid {
            println!("combined compatibility residual: {cb:.3e}");
        }
        if let Some(l) = rep.min_abs_latent {
            println!(
                "min |l(theta0)| on Sigma: {l:.3e} (scale {:.3e})",
                rep.latent_scale
            );
        }
        println!(
            "flux-jump spectral tail (smoothness proxy): {:.3e}",
            rep.flux_tail
        );
        println!("pass at tol {:.1e}: {}", rep.tol, rep.pass);
        for f in &rep.failures {
            println!("  failed: {f}");
        }
    }
    if rep.pass {
        ExitCode::from(0)
    } else {
        ExitCode::from(2)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_ls_scan(
    m: usize,
    kappa0: f64,
    d0: f64,
    l0: f64,
    l2: f64,
    p_scale: f64,
    s_scale: f64,
    out: PathBuf,
    full_grid: bool,
    quiet: bool,
) -> ExitCode {
    let mut p = vec![0.0; (m + 1) * (m + 1)];
    for i in 0..=m {
        p[i * (m + 1) + i] = p_scale;
    }
    let mut s = vec![0.0; m * m];
    for i in 0..m {
        s[i * m + i] = s_scale;
    }
    let coeffs = match FrozenCoefficients::new(m, p, s, vec![0.0; m], kappa0, d0, l0, l2) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let grid = ScanGrid::default_desk();
    let report = match scan(&coeffs, &grid) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if std::fs::create_dir_all(&out).is_err() {
        eprintln!("cannot create {}", out.display());
        return ExitCode::from(1);
    }
    let root = report.located_root.as_ref().map(|(l, a, _)| (*l, *a));
    if emit::write_ls_summary(
        &out,
        report.min_normalized,
        report.min_abs,
        report.min_re_mu,
        root,
    )
    .is_err()
    {
        eprintln!("cannot write scan summary");
        return ExitCode::from(1);
    }
    if full_grid {
        let mut dump = String::from("variant,xi_norm,lambda_re,lambda_im,normalized,abs\n");
        for v in &report.per_variant {
            let xin: f64 = v.argmin_xi.iter().map(|x| x * x).sum::<f64>().sqrt();
            dump.push_str(&format!(
                "{:?},{},{},{},{},{}\n",
                v.variant, xin, v.argmin_lambda.re, v.argmin_lambda.im, v.min_normalized, v.min_abs
            ));
        }
        let _ = std::fs::write(out.join("ls_scan_variants.csv"), dump);
    }
    if !quiet {
        println!(
            "min normalized |det| over all variants: {:.4}",
            report.min_normalized
        );
        println!("min Re(mu) over the grid: {:.4}", report.min_re_mu);
        if let Some((lambda, absval, _)) = report.located_root {
            println!("near-zero located on the positive real axis: lambda = {lambda:.6}, |det| = {absval:.3e}");
        }
    }
    ExitCode::from(0)
}

fn cmd_probe(config: PathBuf, run_dir: PathBuf, out: PathBuf, quiet: bool) -> ExitCode {
    let cfg = match load_config(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    // collect snapshot indices
    let mut indices: Vec<usize> = Vec::new();
    if let Ok(entries) = std::fs::read_dir(&run_dir) {
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().to_string();
            if let Some(rest) = name.strip_prefix("snapshot_") {
                if let Some(num) = rest.strip_suffix(".csv") {
                    if let Ok(n) = num.parse::<usize>() {
                        indices.push(n);
                    }
                }
            }
        }
    }
    indices.sort_unstable();
    if indices.len() < 9 {
        eprintln!(
            "need at least 9 snapshots for the time stencils, found {} in {}",
            indices.len(),
            run_dir.display()
        );
        return ExitCode::from(1);
    }
    let mut frames = Vec::new();
    let mut h_frames = Vec::new();
    for &n in &indices {
        let text = match std::fs::read_to_string(run_dir.join(format!("snapshot_{n}.csv"))) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("snapshot_{n}.csv: {e}");
                return ExitCode::from(1);
            }
        };
        match emit::parse_snapshot(&text) {
            Ok(g) => frames.push(g),
            Err(e) => {
                eprintln!("snapshot_{n}.csv: {e}");
                return ExitCode::from(1);
            }
        }
        let itext =
            match std::fs::read_to_string(run_dir.join(format!("snapshot_{n}_interface.csv"))) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("snapshot_{n}_interface.csv: {e}");
                    return ExitCode::from(1);
                }
            };
        match emit::parse_interface_snapshot(&itext) {
            Ok(g) => h_frames.push(g),
            Err(e) => {
                eprintln!("snapshot_{n}_interface.csv: {e}");
                return ExitCode::from(1);
            }
        }
    }

    // time axis from the snapshot cadence
    let dt_frame = cfg.dt * cfg.snapshot_every.max(1) as f64;
    let t0 = indices[0] as f64 * cfg.dt;
    let nt = frames.len();
    // outer-phase block in chart coordinates (uniform spacing)
    let first = &frames[0];
    let n_s = first.s.len();
    let iy0 = first.r.iter().position(|&r| r >= 0.0).unwrap_or(0);
    let ny = first.r.len() - iy0;
    let dy = first.r[iy0 + 1] - first.r[iy0];
    let theta_field = SpaceTimeField {
        t0,
        dt: dt_frame,
        nt,
        x0: 0.0,
        dx: 2.0 * std::f64::consts::PI / n_s as f64,
        nx: n_s,
        x_periodic: true,
        y0: first.r[iy0],
        dy,
        ny,
        vals: {
            let mut v = Vec::with_capacity(nt * n_s * ny);
            for f in &frames {
                for ix in 0..n_s {
                    for k in 0..ny {
                        v.push(f.theta[(iy0 + k) * n_s + ix]);
                    }
                }
            }
            v
        },
    };
    let h_field = SpaceTimeField {
        t0,
        dt: dt_frame,
        nt,
        x0: 0.0,
        dx: 2.0 * std::f64::consts::PI / n_s as f64,
        nx: n_s,
        x_periodic: true,
        y0: 0.0,
        dy: 1.0,
        ny: 1,
        vals: {
            let mut v = Vec::with_capacity(nt * n_s);
            for f in &h_frames {
                v.extend_from_slice(&f.h);
            }
            v
        },
    };

    let a = cfg.a;
    let t_span = dt_frame * (nt - 1) as f64;
    let probe = match ParamDiffeo::new(
        std::f64::consts::PI,
        a / 6.0,
        a / 40.0,
        t0 + t_span / 2.0,
        t_span / 6.0,
        a,
        Some(2.0 * std::f64::consts::PI),
    ) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let table = match smoothness_probe(&probe, &theta_field, &h_field, probe.r0_ball / 4.0) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    if std::fs::create_dir_all(&out).is_err() || emit::write_probe_table(&out, &table).is_err() {
        eprintln!("cannot write probe table under {}", out.display());
        return ExitCode::from(1);
    }
    if !quiet {
        println!("divided differences of the pulled-back solution at parameter 0:");
        for (k, name) in ["lambda", "mu", "eta"].iter().enumerate() {
            println!(
                "  theta d/d{name}: {:.4e}, d2/d{name}2: {:.4e}",
                table.theta[k][0], table.theta[k][1]
            );
        }
        for (k, name) in ["lambda", "mu"].iter().enumerate() {
            println!(
                "  h     d/d{name}: {:.4e}, d2/d{name}2: {:.4e}",
                table.h[k][0], table.h[k][1]
            );
        }
    }
    ExitCode::from(0)
}

fn cmd_oracle_compare(
    config: PathBuf,
    out: Option<PathBuf>,
    refine: usize,
    quiet: bool,
) -> ExitCode {
    let cfg = match load_config(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    match scenario::oracle_compare(&cfg, &out_dir, refine) {
        Ok((_rows, max_rel)) => {
            if !quiet {
                println!("max relative interface-radius error vs oracle: {max_rel:.4e}");
            }
            ExitCode::from(0)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_sweep(configs: Vec<PathBuf>, out: PathBuf, force: bool) -> ExitCode {
    if configs.is_empty() {
        eprintln!("sweep needs at least one config file");
        return ExitCode::from(1);
    }
    let threads = std::env::var("STEFAN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    let mut named = Vec::new();
    for path in &configs {
        let cfg = match load_config(path) {
            Ok(c) => c,
            Err(code) => return code,
        };
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "run".into());
        named.push((stem, cfg));
    }
    let results = scenario::sweep(&named, &out, force, threads);
    let mut worst = 0u8;
    for (name, res) in results {
        match res {
            Ok(RunOutcome::Clean) => println!("{name}: clean"),
            Ok(RunOutcome::CompatAbort) => {
                println!("{name}: compatibility abort");
                worst = worst.max(2);
            }
            Ok(RunOutcome::Halted { step, reason }) => {
                println!("{name}: halted at step {step}: {reason}");
                worst = worst.max(3);
            }
            Err(e) => {
                println!("{name}: error: {e}");
                worst = worst.max(1);
            }
        }
    }
    ExitCode::from(worst)
}
