//! Command-line and HTTP front end for the cellreach engine: scenario files,
//! a durable session store with undo history, and asynchronous analyze jobs.

pub mod api;
pub mod config;
pub mod error;
pub mod jobs;
pub mod scenario;
pub mod store;

use std::path::{Path, PathBuf};

use cellreach::armkin::catalog::Catalog;
use cellreach::feastool::{analyze, FeasibilityReport};

pub use error::{Category, GatewayError, Result};

/// Outcome of a headless run.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: FeasibilityReport,
    /// Canonical report text, as written to `report_path`.
    pub report_text: String,
    pub report_path: PathBuf,
    pub timings_path: PathBuf,
}

impl RunOutcome {
    /// 0 when every zone has a path, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.overall_feasible {
            0
        } else {
            1
        }
    }
}

/// Loads a scenario, analyzes it and writes the report and timings beside it.
pub fn run_scenario(path: &Path, catalog: &Catalog) -> Result<RunOutcome> {
    let scenario = scenario::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let session = scenario.build_session(base, catalog)?;
    let report = analyze(&session, None)?;
    let report_text = scenario::report_json(&report);
    let (report_path, timings_path) = scenario::output_paths(path);
    std::fs::write(&report_path, &report_text)
        .map_err(|e| GatewayError::storage(format!("{}: {e}", report_path.display())))?;
    std::fs::write(&timings_path, scenario::timings_json(&report.timings()))
        .map_err(|e| GatewayError::storage(format!("{}: {e}", timings_path.display())))?;
    Ok(RunOutcome {
        report,
        report_text,
        report_path,
        timings_path,
    })
}
