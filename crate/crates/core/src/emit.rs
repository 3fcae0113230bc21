//! CSV and provenance emission. Floats are written with Rust's shortest
//! round-trip formatting, so identical runs produce byte-identical files.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::interface;
use crate::materials::MaterialLaws;
use crate::stepper::{DiagRecord, State, StepError};

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Step(#[from] StepError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmitError + '_ {
    move |source| EmitError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One emitted row of the per-step time series.
#[derive(Clone, Copy, Debug)]
pub struct TimeseriesRow {
    pub diag: DiagRecord,
    pub res_inner: f64,
}

pub const TIMESERIES_HEADER: &str = "t,R_mean,h_min,h_max,E_total,S_total,V_max,res_inner";

pub fn write_timeseries(dir: &Path, rows: &[TimeseriesRow]) -> Result<(), EmitError> {
    let path = dir.join("timeseries.csv");
    let mut out = String::new();
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for r in rows {
        let d = &r.diag;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            d.t, d.r_mean, d.h_min, d.h_max, d.e_total, d.s_total, d.v_max, r.res_inner
        ));
    }
    fs::write(&path, out).map_err(io_err(&path))
}

/// Bulk snapshot on the reference grid, row-major over (radial row, angle):
/// header `s,r,theta` with r the signed distance to Σ.
pub fn write_snapshot(dir: &Path, n: usize, state: &State) -> Result<(), EmitError> {
    let grid = &state.theta.grid;
    let path = dir.join(format!("snapshot_{n}.csv"));
    let mut out = String::new();
    out.push_str("s,r,theta\n");
    for i in 0..grid.rows() {
        let r = grid.r_of_row(i);
        for j in 0..grid.n_s() {
            out.push_str(&format!("{},{},{}\n", grid.s[j], r, state.theta.at(i, j)));
        }
    }
    fs::write(&path, out).map_err(io_err(&path))
}

/// Interface snapshot: header `s,h,H,beta,V`, one row per angular sample.
pub fn write_interface_snapshot(dir: &Path, n: usize, state: &State) -> Result<(), EmitError> {
    let grid = &state.theta.grid;
    let path = dir.join(format!("snapshot_{n}_interface.csv"));
    let curvature = interface::mean_curvature(&state.h);
    let beta = interface::beta(&state.h).map_err(StepError::from)?;
    let mut out = String::new();
    out.push_str("s,h,H,beta,V\n");
    for j in 0..grid.n_s() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            grid.s[j],
            state.h.vals[j],
            curvature[j],
            beta[j],
            beta[j] * state.dth.vals[j]
        ));
    }
    fs::write(&path, out).map_err(io_err(&path))
}

/// Config echo plus version string, written once per run.
pub fn write_provenance(dir: &Path, config_echo: &str, extra: &str) -> Result<(), EmitError> {
    let path = dir.join("provenance.txt");
    let mut out = String::new();
    out.push_str(&format!(
        "stefan-core {} (edition {})\n",
        env!("CARGO_PKG_VERSION"),
        "2021"
    ));
    if !extra.is_empty() {
        out.push_str(extra);
        if !extra.ends_with('\n') {
            out.push('\n');
        }
    }
    out.push_str("--- config ---\n");
    out.push_str(config_echo);
    fs::write(&path, out).map_err(io_err(&path))
}

/// Comparison table of the main run against the radial oracle.
pub fn write_comparison(
    dir: &Path,
    rows: &[(f64, f64, f64)],
    max_rel_err: f64,
) -> Result<(), EmitError> {
    let path = dir.join("oracle_compare.csv");
    let mut out = String::new();
    out.push_str("t,R_main,R_oracle,rel_err\n");
    for &(t, rm, ro) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t,
            rm,
            ro,
            (rm - ro).abs() / ro.abs()
        ));
    }
    fs::write(&path, out).map_err(io_err(&path))?;
    let spath = dir.join("oracle_compare_summary.csv");
    fs::write(&spath, format!("max_rel_err\n{max_rel_err}\n")).map_err(io_err(&spath))
}

/// Scan summary row for the symbol checker CLI.
#[allow(clippy::too_many_arguments)]
pub fn write_ls_summary(
    dir: &Path,
    min_normalized: f64,
    min_abs: f64,
    min_re_mu: f64,
    located_root: Option<(f64, f64)>,
) -> Result<(), EmitError> {
    let path = dir.join("ls_scan.csv");
    let (root_lambda, root_abs) = match located_root {
        Some((l, a)) => (l.to_string(), a.to_string()),
        None => (String::new(), String::new()),
    };
    fs::write(
        &path,
        format!(
            "min_normalized,min_abs,min_re_mu,root_lambda,root_abs\n{},{},{},{},{}\n",
            min_normalized, min_abs, min_re_mu, root_lambda, root_abs
        ),
    )
    .map_err(io_err(&path))
}

/// Divided-difference table emitted by the smoothness probe.
pub fn write_probe_table(dir: &Path, table: &crate::diffeo::ProbeTable) -> Result<(), EmitError> {
    let path = dir.join("probe_table.csv");
    let mut out = String::new();
    out.push_str("field,direction,order1,order2\n");
    for (k, name) in ["lambda", "mu", "eta"].iter().enumerate() {
        out.push_str(&format!(
            "theta,{},{},{}\n",
            name, table.theta[k][0], table.theta[k][1]
        ));
    }
    for (k, name) in ["lambda", "mu"].iter().enumerate() {
        out.push_str(&format!("h,{},{},{}\n", name, table.h[k][0], table.h[k][1]));
    }
    fs::write(&path, out).map_err(io_err(&path))
}

pub fn diagnostics_row(
    state: &State,
    laws: &MaterialLaws,
    res_inner: f64,
) -> Result<TimeseriesRow, EmitError> {
    Ok(TimeseriesRow {
        diag: crate::stepper::diagnostics(state, laws)?,
        res_inner,
    })
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("snapshot is empty")]
    Empty,
    #[error("inconsistent grid: {0}")]
    Inconsistent(String),
}

/// A bulk snapshot read back from `snapshot_<n>.csv`: radial-row-major θ on
/// the (s, r) reference grid.
#[derive(Clone, Debug)]
pub struct SnapshotGrid {
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    /// θ values, row-major over (r index, s index).
    pub theta: Vec<f64>,
}

/// Parse a bulk snapshot CSV (`s,r,theta`). The writer emits radial rows
/// outermost; the reader validates that structure and the numeric fields.
pub fn parse_snapshot(text: &str) -> Result<SnapshotGrid, SnapshotError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "s,r,theta" => {}
        Some((_, h)) => {
            return Err(SnapshotError::Malformed {
                line: 1,
                message: format!("expected header `s,r,theta`, got `{h}`"),
            })
        }
        None => return Err(SnapshotError::Empty),
    }
    let mut triples: Vec<(f64, f64, f64)> = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut parts = raw.split(',');
        let mut field = |name: &str| -> Result<f64, SnapshotError> {
            let tok = parts.next().ok_or_else(|| SnapshotError::Malformed {
                line,
                message: format!("missing field `{name}`"),
            })?;
            let v: f64 = tok.trim().parse().map_err(|_| SnapshotError::Malformed {
                line,
                message: format!("field `{name}`: not a number: `{tok}`"),
            })?;
            if !v.is_finite() {
                return Err(SnapshotError::Malformed {
                    line,
                    message: format!("field `{name}` is not finite"),
                });
            }
            Ok(v)
        };
        let s = field("s")?;
        let r = field("r")?;
        let theta = field("theta")?;
        if parts.next().is_some() {
            return Err(SnapshotError::Malformed {
                line,
                message: "too many fields".into(),
            });
        }
        triples.push((s, r, theta));
    }
    if triples.is_empty() {
        return Err(SnapshotError::Empty);
    }
    // infer n_s as the run length of the first radial row
    let r0 = triples[0].1;
    let n_s = triples.iter().take_while(|t| t.1 == r0).count();
    if n_s == 0 || triples.len() % n_s != 0 {
        return Err(SnapshotError::Inconsistent(format!(
            "{} rows do not tile by an angular count of {n_s}",
            triples.len()
        )));
    }
    let rows = triples.len() / n_s;
    let s: Vec<f64> = triples[..n_s].iter().map(|t| t.0).collect();
    let mut r = Vec::with_capacity(rows);
    let mut theta = Vec::with_capacity(triples.len());
    for i in 0..rows {
        let block = &triples[i * n_s..(i + 1) * n_s];
        let ri = block[0].1;
        if let Some(prev) = r.last() {
            if ri <= *prev {
                return Err(SnapshotError::Inconsistent(format!(
                    "radial rows must increase, got {ri} after {prev}"
                )));
            }
        }
        for (j, t) in block.iter().enumerate() {
            if t.1 != ri {
                return Err(SnapshotError::Inconsistent("ragged radial row".into()));
            }
            if t.0 != s[j] {
                return Err(SnapshotError::Inconsistent(
                    "angular samples differ across rows".into(),
                ));
            }
        }
        r.push(ri);
        theta.extend(block.iter().map(|t| t.2));
    }
    Ok(SnapshotGrid { s, r, theta })
}

/// An interface snapshot read back from `snapshot_<n>_interface.csv`.
#[derive(Clone, Debug)]
pub struct InterfaceSnapshot {
    pub s: Vec<f64>,
    pub h: Vec<f64>,
    pub curvature: Vec<f64>,
    pub beta: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn parse_interface_snapshot(text: &str) -> Result<InterfaceSnapshot, SnapshotError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "s,h,H,beta,V" => {}
        Some((_, h)) => {
            return Err(SnapshotError::Malformed {
                line: 1,
                message: format!("expected header `s,h,H,beta,V`, got `{h}`"),
            })
        }
        None => return Err(SnapshotError::Empty),
    }
    let mut out = InterfaceSnapshot {
        s: Vec::new(),
        h: Vec::new(),
        curvature: Vec::new(),
        beta: Vec::new(),
        v: Vec::new(),
    };
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 5 {
            return Err(SnapshotError::Malformed {
                line,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let mut parsed = [0.0f64; 5];
        for (k, tok) in fields.iter().enumerate() {
            parsed[k] = tok.trim().parse().map_err(|_| SnapshotError::Malformed {
                line,
                message: format!("not a number: `{tok}`"),
            })?;
            if !parsed[k].is_finite() {
                return Err(SnapshotError::Malformed {
                    line,
                    message: "non-finite value".into(),
                });
            }
        }
        out.s.push(parsed[0]);
        out.h.push(parsed[1]);
        out.curvature.push(parsed[2]);
        out.beta.push(parsed[3]);
        out.v.push(parsed[4]);
    }
    if out.s.is_empty() {
        return Err(SnapshotError::Empty);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{BulkField, Grid, HeightField};
    use crate::geometry::TubularChart;
    use crate::materials::Coefficient;

    fn tiny_state() -> (State, MaterialLaws) {
        let g = Grid::new(TubularChart::with_defaults(1.0, 16, 8, 8).unwrap());
        let laws = MaterialLaws::default_laws(
            [1.0, 1.0],
            1.0,
            1.0,
            [Coefficient::constant(1.0), Coefficient::constant(1.0)],
            0.2,
            None,
            (0.3, 3.0),
        )
        .unwrap();
        let theta = BulkField::constant(g.clone(), 1.2);
        let h = HeightField::constant(1.0, 16, 0.0);
        let dth = HeightField::constant(1.0, 16, 0.0);
        (State::new(theta, h, dth), laws)
    }

    #[test]
    fn headers_and_row_counts() {
        let dir = std::env::temp_dir().join(format!("stefan_emit_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let (state, laws) = tiny_state();
        let row = diagnostics_row(&state, &laws, 1e-12).unwrap();
        write_timeseries(&dir, &[row]).unwrap();
        let ts = std::fs::read_to_string(dir.join("timeseries.csv")).unwrap();
        let mut lines = ts.lines();
        assert_eq!(lines.next().unwrap(), TIMESERIES_HEADER);
        assert_eq!(lines.next().unwrap().split(',').count(), 8);

        write_snapshot(&dir, 3, &state).unwrap();
        let snap = std::fs::read_to_string(dir.join("snapshot_3.csv")).unwrap();
        assert_eq!(snap.lines().next().unwrap(), "s,r,theta");
        assert_eq!(snap.lines().count(), 1 + 17 * 16);

        write_interface_snapshot(&dir, 3, &state).unwrap();
        let isnap = std::fs::read_to_string(dir.join("snapshot_3_interface.csv")).unwrap();
        assert_eq!(isnap.lines().next().unwrap(), "s,h,H,beta,V");
        assert_eq!(isnap.lines().count(), 1 + 16, "interface rows = N_s");

        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn float_formatting_roundtrips() {
        for &v in &[0.1, 1.0 / 3.0, 2.5e-17, -1234.5678e9] {
            let s = format!("{v}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
