//! Scenario files, trajectory tables, plan documents and SVG plots.

mod export;
mod scenario;
mod svg;

use std::path::Path;

use thiserror::Error;

pub use export::{
    format_number, plan_summary, round_significant, to_json, trajectories_to_csv, trajectories_to_json,
    trajectory_rows, PhaseSummary, PlanSummary, TrajectoryRow, CSV_HEADER,
};
pub use scenario::{parse_scenario, parse_scenario_str, scenario_to_toml, SCHEMA_VERSION};
pub use svg::{render_svg, SvgOptions};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Unit(String),
    #[error("nothing to export")]
    Empty,
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            IoError::Io { .. } => "IO",
            IoError::Parse { .. } => "PARSE",
            IoError::Schema(_) => "SCHEMA",
            IoError::Unit(_) => "UNIT",
            IoError::Empty => "EMPTY",
        }
    }
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| IoError::io(path, e))
}
