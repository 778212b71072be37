use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use quantlab_core::QuantError;
use serde::Serialize;

use crate::outcome::Assertion;
use crate::registry::Experiment;
use crate::settings::Settings;

#[derive(Debug)]
pub enum CliError {
    /// Bad command line, unknown experiment or invalid parameters.
    Usage(String),
    /// The computation itself failed.
    Numerical(QuantError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub paper_anchor: String,
    pub assertions: Vec<Assertion>,
    pub runtime_seconds: f64,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

/// Validates, runs and writes `<out>/<name>/<table>.csv` plus `summary.json`.
pub fn run_experiment(exp: &dyn Experiment, settings: &Settings, out: &Path) -> Result<(Summary, PathBuf), CliError> {
    settings.check(exp.uses_grid()).map_err(CliError::Usage)?;
    exp.validate(settings).map_err(CliError::Usage)?;
    let start = Instant::now();
    let outcome = exp.run(settings).map_err(CliError::Numerical)?;
    let runtime_seconds = start.elapsed().as_secs_f64();

    let dir = out.join(exp.name());
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    for table in &outcome.tables {
        let path = dir.join(format!("{}.csv", table.name));
        let text = table.to_csv().map_err(|e| io_err(&path, e))?;
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    }
    let summary = Summary {
        experiment: exp.name().to_string(),
        paper_anchor: exp.claim().to_string(),
        assertions: outcome.assertions,
        runtime_seconds,
    };
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|e| io_err(&path, e))?;
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    Ok((summary, dir))
}
