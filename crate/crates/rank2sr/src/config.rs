//! Scenario configuration: one `[structure]` table and an ordered list of `[[stage]]` tables.

use std::path::{Path, PathBuf};

use rank2sr_core::ode::Tolerances;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const BUILTIN_SCENARIOS: [(&str, &str); 3] = [
    ("martinet-abnormal", include_str!("../scenarios/martinet-abnormal.toml")),
    ("free4-detsign", include_str!("../scenarios/free4-detsign.toml")),
    ("free4-pipeline", include_str!("../scenarios/free4-pipeline.toml")),
];

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the config file; `--out` overrides it.
    pub out: Option<PathBuf>,
    pub structure: StructureRef,
    #[serde(rename = "stage", default)]
    pub stages: Vec<StageSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StructureRef {
    pub builtin: Option<String>,
    pub file: Option<PathBuf>,
}

/// `c + decay_amp e^{-decay_rate s} + osc_amp sin(osc_freq s + osc_phase)`, or a bare number.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Coef {
    Constant(f64),
    Profile {
        #[serde(default)]
        c: f64,
        #[serde(default)]
        decay_amp: f64,
        #[serde(default)]
        decay_rate: f64,
        #[serde(default)]
        osc_amp: f64,
        #[serde(default)]
        osc_freq: f64,
        #[serde(default)]
        osc_phase: f64,
    },
}

impl Coef {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Coef::Constant(c) => c,
            Coef::Profile { c, decay_amp, decay_rate, osc_amp, osc_freq, osc_phase } => {
                c + decay_amp * (-decay_rate * s).exp() + osc_amp * (osc_freq * s + osc_phase).sin()
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Coef::Constant(c) => c.is_finite(),
            Coef::Profile { c, decay_amp, decay_rate, osc_amp, osc_freq, osc_phase } => {
                [c, decay_amp, decay_rate, osc_amp, osc_freq, osc_phase].iter().all(|v| v.is_finite())
            }
        }
    }
}

fn one() -> f64 {
    1.0
}

fn det_tol() -> f64 {
    1e-8
}

fn max_len() -> usize {
    4
}

fn yes() -> bool {
    true
}

fn ds() -> f64 {
    0.01
}

fn det_max() -> f64 {
    -0.1
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StageSpec {
    /// Flag dimensions and bracket values at a point.
    Brackets {
        point: Option<Vec<f64>>,
        #[serde(default = "max_len")]
        max_len: usize,
    },
    /// One abnormal feedback run; a missing `p0` is sampled from the annihilator of `D^2(x0)`.
    Abnormal {
        x0: Option<Vec<f64>>,
        p0: Option<Vec<f64>>,
        t_end: f64,
        #[serde(default = "one")]
        sign: f64,
        #[serde(default)]
        start: StartMode,
    },
    /// Batch of randomized abnormal runs classified at their zeros.
    Detsign {
        runs: usize,
        t_end: f64,
        #[serde(default = "det_tol")]
        det_tol: f64,
        #[serde(default = "yes")]
        aim: bool,
    },
    /// Shooting runs to `h = 0` and the limit direction of the control.
    Eigenlimit {
        instances: usize,
        t_end: f64,
        #[serde(default = "det_max")]
        det_max: f64,
        #[serde(default = "one")]
        sign: f64,
    },
    /// Rescaled-time path of the last abnormal stage that reached a zero.
    Rescale {},
    /// Degenerate polar dynamics with dichotomy detection and window estimates.
    Polar {
        alpha: Coef,
        beta: Coef,
        zeta: Coef,
        #[serde(default = "one")]
        rho0: f64,
        theta0: f64,
        s_max: f64,
        eps: f64,
        #[serde(default = "ds")]
        ds: f64,
    },
    /// Elliptic polar dynamics with the exclusion monitor.
    Elliptic {
        alpha: Coef,
        mu: Coef,
        eta: Coef,
        #[serde(default = "one")]
        rho0: f64,
        #[serde(default)]
        theta0: f64,
        s_max: f64,
        rate: f64,
        window: f64,
        #[serde(default = "ds")]
        ds: f64,
    },
    /// Corner non-minimality test.
    Corner { x0: Option<Vec<f64>>, v_minus: [f64; 2], v_plus: [f64; 2], eps_leg: f64, n: usize },
    /// Length minimisation between two points.
    Minimize {
        x0: Option<Vec<f64>>,
        x1: Vec<f64>,
        n: usize,
        #[serde(default)]
        init_angle: f64,
        #[serde(default = "one")]
        init_speed: f64,
    },
}

impl StageSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            StageSpec::Brackets { .. } => "brackets",
            StageSpec::Abnormal { .. } => "abnormal",
            StageSpec::Detsign { .. } => "detsign",
            StageSpec::Eigenlimit { .. } => "eigenlimit",
            StageSpec::Rescale {} => "rescale",
            StageSpec::Polar { .. } => "polar",
            StageSpec::Elliptic { .. } => "elliptic",
            StageSpec::Corner { .. } => "corner",
            StageSpec::Minimize { .. } => "minimize",
        }
    }
}

/// How the initial covector of an abnormal stage is prepared.
#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum StartMode {
    /// Use `p0` (or the sample) as is.
    #[default]
    Given,
    /// Put `h(0)` on the attracting eigenline of `A(0)`.
    Aim,
    /// Shoot on the direction of `h(0)` until the run reaches `h = 0`.
    Shoot,
}

/// Process-wide knobs from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub jobs: usize,
    /// Multiplies the integration tolerances (default `1e-10`).
    pub tol_scale: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { jobs: 1, tol_scale: 1.0 }
    }
}

impl Settings {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances::uniform(1e-10 * self.tol_scale)
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new().num_threads(self.jobs.max(1)).build().map_err(|e| CliError::Config(format!("worker pool: {e}")))
    }
}

pub fn parse_scenario(src: &str) -> Result<Scenario> {
    toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))
}

pub fn builtin_scenario_names() -> impl Iterator<Item = &'static str> {
    BUILTIN_SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn builtin_scenario_source(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Loads a config from a path, or a builtin scenario by name when no such file exists.
/// Returns the scenario and the directory relative paths resolve against.
pub fn load_scenario(reference: &str) -> Result<(Scenario, PathBuf)> {
    let path = Path::new(reference);
    if path.is_file() {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok((parse_scenario(&src)?, base));
    }
    match builtin_scenario_source(reference) {
        Some(src) => Ok((parse_scenario(src)?, PathBuf::from("."))),
        None => Err(CliError::Config(format!("no config file or builtin scenario named `{reference}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_parse() {
        for name in builtin_scenario_names() {
            let s = parse_scenario(builtin_scenario_source(name).unwrap()).unwrap();
            assert_eq!(s.name, name);
            assert!(!s.stages.is_empty());
        }
    }

    #[test]
    fn coefficients_and_unknown_fields() {
        let s: Scenario = toml::from_str(
            r#"
            name = "t"
            [structure]
            builtin = "heisenberg"
            [[stage]]
            kind = "polar"
            alpha = 0.0
            beta = { c = 1.0, decay_amp = 0.5, decay_rate = 2.0 }
            zeta = 0
            theta0 = 1.0
            s_max = 10.0
            eps = 0.1
            "#,
        )
        .unwrap();
        match &s.stages[0] {
            StageSpec::Polar { beta, zeta, .. } => {
                assert_eq!(beta.eval(0.0), 1.5);
                assert_eq!(zeta.eval(3.0), 0.0);
            }
            other => panic!("{other:?}"),
        }
        let bad = "name = \"t\"\n[structure]\nbuiltin = \"heisenberg\"\n[[stage]]\nkind = \"corner\"\nbogus = 1\n";
        assert!(matches!(parse_scenario(bad), Err(CliError::Config(_))));
        assert!(matches!(parse_scenario("name = "), Err(CliError::Config(_))));
    }
}
