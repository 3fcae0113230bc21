//! Scenario configuration: a plain `key = value` text format with `#`
//! comments and dotted section keys. Parsing collects every violation
//! (unknown key, type mismatch, invariant breach) with its key path and line
//! number instead of stopping at the first.

use std::fmt;

use thiserror::Error;

use crate::geometry::{GeometryError, TubularChart};
use crate::materials::{Coefficient, MaterialError, MaterialLaws};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration issue(s):", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Equilibrium,
    PerturbedCircle,
    RadialMelt,
    Manufactured,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Equilibrium => "equilibrium",
            ScenarioKind::PerturbedCircle => "perturbed_circle",
            ScenarioKind::RadialMelt => "radial_melt",
            ScenarioKind::Manufactured => "manufactured",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaterialFamily {
    Default,
    PowerLawD,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub r0: f64,
    pub a: f64,
    pub r_in: f64,
    pub r_out: f64,
    pub n_s: usize,
    pub n_r1: usize,
    pub n_r2: usize,
    pub family: MaterialFamily,
    pub kappa1: f64,
    pub kappa2: f64,
    pub lm: f64,
    pub theta_m: f64,
    pub sigma: f64,
    /// Constant kinetic-undercooling coefficient; 0 selects the γ ≡ 0 regime.
    pub gamma0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_exp1: f64,
    pub d_exp2: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub dt: f64,
    pub steps: usize,
    pub inner_iters: usize,
    pub smoothing: usize,
    pub tolerance: f64,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub amplitude: f64,
    pub mode: usize,
    pub melt_amp1: f64,
    pub melt_amp2: f64,
    pub out_dir: String,
    pub snapshot_every: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            r0: 1.0,
            a: 0.5,
            r_in: 0.25,
            r_out: 2.0,
            n_s: 128,
            n_r1: 32,
            n_r2: 32,
            family: MaterialFamily::Default,
            kappa1: 1.0,
            kappa2: 1.0,
            lm: 1.0,
            theta_m: 1.0,
            sigma: 0.2,
            gamma0: 0.0,
            d1: 1.2,
            d2: 0.8,
            d_exp1: 0.0,
            d_exp2: 0.0,
            theta_lo: 0.25,
            theta_hi: 4.0,
            dt: 1e-3,
            steps: 100,
            inner_iters: 2,
            smoothing: 0,
            tolerance: 1e-8,
            kind: ScenarioKind::Equilibrium,
            seed: 0,
            amplitude: 0.01,
            mode: 2,
            melt_amp1: 0.05,
            melt_amp2: -0.05,
            out_dir: "out".to_string(),
            snapshot_every: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn build_chart(&self) -> Result<TubularChart, GeometryError> {
        TubularChart::new(
            self.r0, self.a, self.r_in, self.r_out, self.n_s, self.n_r1, self.n_r2,
        )
    }

    pub fn build_laws(&self) -> Result<MaterialLaws, MaterialError> {
        let d = match self.family {
            MaterialFamily::Default => [
                Coefficient::constant(self.d1),
                Coefficient::constant(self.d2),
            ],
            MaterialFamily::PowerLawD => [
                Coefficient::power(self.d1, self.d_exp1),
                Coefficient::power(self.d2, self.d_exp2),
            ],
        };
        let gamma = if self.gamma0 == 0.0 {
            None
        } else {
            Some(Coefficient::constant(self.gamma0))
        };
        MaterialLaws::default_laws(
            [self.kappa1, self.kappa2],
            self.lm,
            self.theta_m,
            d,
            self.sigma,
            gamma,
            (self.theta_lo, self.theta_hi),
        )
    }

    /// Canonical text rendering; `parse_config(serialize(c))` reproduces `c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv(&mut s, "geometry.r0", self.r0.to_string());
        kv(&mut s, "geometry.a", self.a.to_string());
        kv(&mut s, "geometry.r_in", self.r_in.to_string());
        kv(&mut s, "geometry.r_out", self.r_out.to_string());
        kv(&mut s, "geometry.n_s", self.n_s.to_string());
        kv(&mut s, "geometry.n_r1", self.n_r1.to_string());
        kv(&mut s, "geometry.n_r2", self.n_r2.to_string());
        let fam = match self.family {
            MaterialFamily::Default => "default",
            MaterialFamily::PowerLawD => "power_law_d",
        };
        kv(&mut s, "material.family", fam.to_string());
        kv(&mut s, "material.kappa1", self.kappa1.to_string());
        kv(&mut s, "material.kappa2", self.kappa2.to_string());
        kv(&mut s, "material.lm", self.lm.to_string());
        kv(&mut s, "material.theta_m", self.theta_m.to_string());
        kv(&mut s, "material.sigma", self.sigma.to_string());
        kv(&mut s, "material.gamma0", self.gamma0.to_string());
        kv(&mut s, "material.d1", self.d1.to_string());
        kv(&mut s, "material.d2", self.d2.to_string());
        kv(&mut s, "material.d_exp1", self.d_exp1.to_string());
        kv(&mut s, "material.d_exp2", self.d_exp2.to_string());
        kv(&mut s, "material.theta_lo", self.theta_lo.to_string());
        kv(&mut s, "material.theta_hi", self.theta_hi.to_string());
        kv(&mut s, "run.dt", self.dt.to_string());
        kv(&mut s, "run.steps", self.steps.to_string());
        kv(&mut s, "run.inner_iters", self.inner_iters.to_string());
        kv(&mut s, "run.smoothing", self.smoothing.to_string());
        kv(&mut s, "run.tolerance", self.tolerance.to_string());
        kv(&mut s, "scenario.kind", self.kind.as_str().to_string());
        kv(&mut s, "scenario.seed", self.seed.to_string());
        kv(&mut s, "scenario.amplitude", self.amplitude.to_string());
        kv(&mut s, "scenario.mode", self.mode.to_string());
        kv(&mut s, "scenario.melt_amp1", self.melt_amp1.to_string());
        kv(&mut s, "scenario.melt_amp2", self.melt_amp2.to_string());
        kv(&mut s, "output.dir", self.out_dir.clone());
        kv(
            &mut s,
            "output.snapshot_every",
            self.snapshot_every.to_string(),
        );
        s
    }
}

/// Parse a configuration text. Unset keys take documented defaults; the
/// geometry defaults `a = r0/2`, `r_in = r0/4`, `r_out = 2·r0` follow r0
/// unless set explicitly.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut issues = Vec::new();
    let saw = |_k: &str| {};
    let mut explicit_a = false;
    let mut explicit_rin = false;
    let mut explicit_rout = false;
    let mut explicit_r0 = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let stripped = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some((key_raw, val_raw)) = trimmed.split_once('=') else {
            issues.push(ConfigIssue {
                line: Some(line),
                key: trimmed.to_string(),
                message: "expected `key = value`".to_string(),
            });
            continue;
        };
        let key = key_raw.trim();
        let val = val_raw.trim();
        fn set_float(
            val: &str,
            key: &str,
            line: usize,
            issues: &mut Vec<ConfigIssue>,
            target: &mut f64,
        ) {
            match val.parse::<f64>() {
                Ok(v) => *target = v,
                Err(_) => issues.push(ConfigIssue {
                    line: Some(line),
                    key: key.to_string(),
                    message: format!("expected a number, got `{val}`"),
                }),
            }
        }
        fn set_usize(
            val: &str,
            key: &str,
            line: usize,
            issues: &mut Vec<ConfigIssue>,
            target: &mut usize,
        ) {
            match val.parse::<usize>() {
                Ok(v) => *target = v,
                Err(_) => issues.push(ConfigIssue {
                    line: Some(line),
                    key: key.to_string(),
                    message: format!("expected a nonnegative integer, got `{val}`"),
                }),
            }
        }
        let float = |issues: &mut Vec<ConfigIssue>, target: &mut f64| {
            set_float(val, key, line, issues, target)
        };
        let unsigned = |issues: &mut Vec<ConfigIssue>, target: &mut usize| {
            set_usize(val, key, line, issues, target)
        };
        match key {
            "geometry.r0" => {
                explicit_r0 = true;
                float(&mut issues, &mut cfg.r0)
            }
            "geometry.a" => {
                explicit_a = true;
                float(&mut issues, &mut cfg.a)
            }
            "geometry.r_in" => {
                explicit_rin = true;
                float(&mut issues, &mut cfg.r_in)
            }
            "geometry.r_out" => {
                explicit_rout = true;
                float(&mut issues, &mut cfg.r_out)
            }
            "geometry.n_s" => unsigned(&mut issues, &mut cfg.n_s),
            "geometry.n_r1" => unsigned(&mut issues, &mut cfg.n_r1),
            "geometry.n_r2" => unsigned(&mut issues, &mut cfg.n_r2),
            "material.family" => match val {
                "default" => cfg.family = MaterialFamily::Default,
                "power_law_d" => cfg.family = MaterialFamily::PowerLawD,
                other => issues.push(ConfigIssue {
                    line: Some(line),
                    key: key.to_string(),
                    message: format!("unknown family `{other}` (default | power_law_d)"),
                }),
            },
            "material.kappa1" => float(&mut issues, &mut cfg.kappa1),
            "material.kappa2" => float(&mut issues, &mut cfg.kappa2),
            "material.lm" => float(&mut issues, &mut cfg.lm),
            "material.theta_m" => float(&mut issues, &mut cfg.theta_m),
            "material.sigma" => float(&mut issues, &mut cfg.sigma),
            "material.gamma0" => float(&mut issues, &mut cfg.gamma0),
            "material.d1" => float(&mut issues, &mut cfg.d1),
            "material.d2" => float(&mut issues, &mut cfg.d2),
            "material.d_exp1" => float(&mut issues, &mut cfg.d_exp1),
            "material.d_exp2" => float(&mut issues, &mut cfg.d_exp2),
            "material.theta_lo" => float(&mut issues, &mut cfg.theta_lo),
            "material.theta_hi" => float(&mut issues, &mut cfg.theta_hi),
            "run.dt" => float(&mut issues, &mut cfg.dt),
            "run.steps" => unsigned(&mut issues, &mut cfg.steps),
            "run.inner_iters" => unsigned(&mut issues, &mut cfg.inner_iters),
            "run.smoothing" => unsigned(&mut issues, &mut cfg.smoothing),
            "run.tolerance" => float(&mut issues, &mut cfg.tolerance),
            "scenario.kind" => match val {
                "equilibrium" => cfg.kind = ScenarioKind::Equilibrium,
                "perturbed_circle" => cfg.kind = ScenarioKind::PerturbedCircle,
                "radial_melt" => cfg.kind = ScenarioKind::RadialMelt,
                "manufactured" => cfg.kind = ScenarioKind::Manufactured,
                other => issues.push(ConfigIssue {
                    line: Some(line),
                    key: key.to_string(),
                    message: format!(
                        "unknown scenario `{other}` (equilibrium | perturbed_circle | radial_melt | manufactured)"
                    ),
                }),
            },
            "scenario.seed" => match val.parse::<u64>() {
                Ok(v) => cfg.seed = v,
                Err(_) => issues.push(ConfigIssue {
                    line: Some(line),
                    key: key.to_string(),
                    message: format!("expected an unsigned integer, got `{val}`"),
                }),
            },
            "scenario.amplitude" => float(&mut issues, &mut cfg.amplitude),
            "scenario.mode" => unsigned(&mut issues, &mut cfg.mode),
            "scenario.melt_amp1" => float(&mut issues, &mut cfg.melt_amp1),
            "scenario.melt_amp2" => float(&mut issues, &mut cfg.melt_amp2),
            "output.dir" => cfg.out_dir = val.to_string(),
            "output.snapshot_every" => unsigned(&mut issues, &mut cfg.snapshot_every),
            unknown => issues.push(ConfigIssue {
                line: Some(line),
                key: unknown.to_string(),
                message: "unknown key".to_string(),
            }),
        }
        saw(key);
    }

    // derived geometry defaults follow an explicit r0
    if explicit_r0 {
        if !explicit_a {
            cfg.a = cfg.r0 / 2.0;
        }
        if !explicit_rin {
            cfg.r_in = cfg.r0 / 4.0;
        }
        if !explicit_rout {
            cfg.r_out = 2.0 * cfg.r0;
        }
    }

    // invariant validation through the module constructors
    if let Err(e) = cfg.build_chart() {
        issues.push(ConfigIssue {
            line: None,
            key: "geometry".to_string(),
            message: e.to_string(),
        });
    }
    if let Err(e) = cfg.build_laws() {
        issues.push(ConfigIssue {
            line: None,
            key: "material".to_string(),
            message: e.to_string(),
        });
    }
    if cfg.dt <= 0.0 {
        issues.push(ConfigIssue {
            line: None,
            key: "run.dt".to_string(),
            message: format!("time step must be positive, got {}", cfg.dt),
        });
    }
    if cfg.inner_iters == 0 {
        issues.push(ConfigIssue {
            line: None,
            key: "run.inner_iters".to_string(),
            message: "at least one inner iteration is required".to_string(),
        });
    }

    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { issues })
    }
}
