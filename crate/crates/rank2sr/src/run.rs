//! Runs a scenario end to end: loads the structure, validates every stage, executes the
//! stages in order and writes `NN-kind.csv`, `NN-kind.json` and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rank2sr_core::structures::SRStructure;
use serde::{Deserialize, Serialize};

use crate::config::{Scenario, Settings};
use crate::error::{CliError, Result};
use crate::library;
use crate::output::{validate_report, validate_table, write_json, write_table, StageReport};
use crate::stages::{run_stage, validate, Pipeline};

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub structure: String,
    pub seed: u64,
    pub tolerances: f64,
    pub tol_scale: f64,
    pub jobs: usize,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub stages: Vec<String>,
    pub exit_code: i32,
    pub error: Option<String>,
}

pub fn resolve_structure(sc: &Scenario, base: &Path) -> Result<SRStructure> {
    match (&sc.structure.builtin, &sc.structure.file) {
        (Some(name), None) => library::builtin(name),
        (None, Some(file)) => library::load_file(&base.join(file)),
        _ => Err(CliError::Config("[structure] needs exactly one of `builtin` or `file`".into())),
    }
}

pub fn output_dir(sc: &Scenario, base: &Path, out: Option<&Path>) -> PathBuf {
    match (out, &sc.out) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("out").join(&sc.name),
    }
}

/// Executes the scenario, writing artifacts into `dir`. The manifest is written even when a
/// stage fails, carrying the exit code.
pub fn run_scenario(sc: &Scenario, base: &Path, dir: &Path, settings: Settings) -> Result<Vec<StageReport>> {
    let s = resolve_structure(sc, base)?;
    validate(&sc.stages, &s)?;
    fs::create_dir_all(dir)?;
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut stage_files = Vec::new();
    let outcome = execute(sc, &s, dir, settings, &mut stage_files);
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: sc.name.clone(),
        structure: s.name.clone(),
        seed: sc.seed,
        tolerances: settings.tolerances().rtol,
        tol_scale: settings.tol_scale,
        jobs: settings.jobs,
        started_unix,
        wall_time_s: started.elapsed().as_secs_f64(),
        stages: stage_files,
        exit_code: outcome.as_ref().map_or_else(CliError::exit_code, |_| 0),
        error: outcome.as_ref().err().map(ToString::to_string),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    outcome
}

fn execute(sc: &Scenario, s: &SRStructure, dir: &Path, settings: Settings, files: &mut Vec<String>) -> Result<Vec<StageReport>> {
    let mut p = Pipeline::new(s, sc.seed, settings);
    let mut reports = Vec::new();
    for (i, spec) in sc.stages.iter().enumerate() {
        let out = run_stage(&mut p, i, spec)?;
        let mut written = Vec::new();
        for t in &out.tables {
            let path = write_table(dir, t)?;
            validate_table(&path, &t.header)?;
            written.push(t.file.clone());
        }
        let report = StageReport {
            stage: spec.kind().into(),
            index: i,
            passed: out.checks.iter().all(|c| c.pass),
            checks: out.checks,
            files: written,
            summary: out.summary,
        };
        let json = format!("{i:02}-{}.json", spec.kind());
        let path = dir.join(&json);
        write_json(&path, &report)?;
        validate_report(&path)?;
        files.push(json);
        if let Some(c) = report.checks.iter().find(|c| !c.pass) {
            return Err(CliError::Invariant {
                name: c.name.clone(),
                detail: format!("stage {i} ({}): {} = {:e}, bound {:e}", spec.kind(), c.name, c.value, c.bound),
            });
        }
        reports.push(report);
    }
    Ok(reports)
}
