//! Profiling report: per-path wall times and the derived PCE metrics.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PceError, Result};
use crate::exec::CorrelationSeries;
use crate::model::ModelKind;

/// Median wall times of one path, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTimes {
    pub cartan: f64,
    pub compile: f64,
    pub load: f64,
    pub quantum: f64,
    pub post: f64,
    pub total: f64,
    /// `total - quantum`.
    pub classical: f64,
}

impl PathTimes {
    pub fn new(cartan: f64, compile: f64, load: f64, quantum: f64, post: f64) -> Self {
        let total = cartan + compile + load + quantum + post;
        Self { cartan, compile, load, quantum, post, total, classical: total - quantum }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub model: ModelKind,
    pub sites: usize,
    /// Number of time points; each one is measured in two bases.
    pub time_points: usize,
    pub circuits: usize,
    pub templates: Option<usize>,
    pub repetitions: usize,
    pub no_pce: Option<PathTimes>,
    pub pce: Option<PathTimes>,
    pub compile_speedup: Option<f64>,
    pub classical_time_reduced_percent: Option<f64>,
    pub time_saved_seconds: Option<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ProfileReport {
    pub fn new(
        model: ModelKind,
        sites: usize,
        time_points: usize,
        repetitions: usize,
        no_pce: Option<PathTimes>,
        pce: Option<PathTimes>,
    ) -> Self {
        let (speedup, reduced, saved) = match (no_pce, pce) {
            (Some(a), Some(b)) => (
                Some(a.compile / b.compile),
                Some(100.0 * (a.classical - b.classical) / a.classical),
                Some(a.classical - b.classical),
            ),
            _ => (None, None, None),
        };
        let mut metadata = BTreeMap::new();
        metadata.insert(
            "circuit_count".into(),
            format!("{time_points} time points x 2 bases = {} circuits", 2 * time_points),
        );
        Self {
            model,
            sites,
            time_points,
            circuits: 2 * time_points,
            templates: None,
            repetitions,
            no_pce,
            pce,
            compile_speedup: speedup,
            classical_time_reduced_percent: reduced,
            time_saved_seconds: saved,
            metadata,
        }
    }

    /// One table row: model, time points, sites, speedup, reduction, saving.
    pub fn table_row(&self) -> String {
        let opt = |v: Option<f64>, digits: usize| match v {
            Some(v) => format!("{v:.digits$}"),
            None => "-".to_string(),
        };
        format!(
            "{} | {} | {} | {} | {} | {}",
            self.model.label(),
            self.time_points,
            self.sites,
            opt(self.compile_speedup, 2),
            opt(self.classical_time_reduced_percent, 2),
            opt(self.time_saved_seconds, 4),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub const TABLE_HEADER: &str = "Model | # Circuits | Sites | Compile Speedup | Time Reduced (%) | Time Saved (s)";

pub fn format_table(reports: &[ProfileReport]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.table_row());
        out.push('\n');
    }
    out
}

/// Writes `correlation.csv`, `correlation.json`, `report.json` and
/// `report.txt` into `dir`. An empty series is rejected before anything is
/// written.
pub fn emit_report(report: &ProfileReport, series: &CorrelationSeries, dir: &Path) -> Result<Vec<PathBuf>> {
    if series.is_empty() {
        return Err(PceError::EmptySeries);
    }
    fs::create_dir_all(dir)?;
    let files = [
        ("correlation.csv", series.to_csv()),
        ("correlation.json", series.to_json()?),
        ("report.json", report.to_json()?),
        ("report.txt", format_table(std::slice::from_ref(report))),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
