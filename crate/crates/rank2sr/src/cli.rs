use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_scenario, Settings};
use crate::error::{CliError, Result};
use crate::library;
use crate::output::write_json;
use crate::run::{output_dir, run_scenario};
use crate::suites::{run_suite, SUITES};

#[derive(Debug, Parser)]
#[command(name = "rank2sr", version, about = "Rank-2 sub-Riemannian extremal dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct Common {
    /// Worker threads for batch stages.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Factor applied to the integration tolerances.
    #[arg(long, default_value_t = 1.0)]
    pub tol_scale: f64,
}

impl Common {
    fn settings(self) -> Result<Settings> {
        if self.jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        if !(self.tol_scale > 0.0 && self.tol_scale.is_finite()) {
            return Err(CliError::Config("--tol-scale must be positive".into()));
        }
        Ok(Settings { jobs: self.jobs, tol_scale: self.tol_scale })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario from a TOML file or a builtin scenario name.
    Run {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite and print its report.
    Verify {
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// List the builtin structures and scenarios.
    ListStructures,
}

/// Executes a parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out, common } => {
            let settings = common.settings()?;
            let (sc, base) = load_scenario(&config)?;
            let dir = output_dir(&sc, &base, out.as_deref());
            let reports = run_scenario(&sc, &base, &dir, settings)?;
            for r in &reports {
                println!("stage {:02} {:<10} pass ({} checks)", r.index, r.stage, r.checks.len());
            }
            println!("outputs in {}", dir.display());
            Ok(0)
        }
        Command::Verify { suite, out, common } => {
            let settings = common.settings()?;
            if !SUITES.contains(&suite.as_str()) {
                return Err(CliError::UnknownSuite(suite));
            }
            let rep = run_suite(&suite, settings)?;
            println!("{}", serde_json::to_string_pretty(&rep).map_err(|e| CliError::Io(std::io::Error::other(e)))?);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                write_json(&dir.join(format!("{suite}.json")), &rep)?;
            }
            if rep.passed {
                Ok(0)
            } else {
                let failed: Vec<String> = rep.criteria.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
                Err(CliError::Invariant { name: failed.join(", "), detail: format!("suite {suite}") })
            }
        }
        Command::ListStructures => {
            for name in library::builtin_names() {
                let f = library::builtin_file(name).expect("builtin");
                println!("{name:<16} {}", f.description);
            }
            Ok(0)
        }
    }
}
