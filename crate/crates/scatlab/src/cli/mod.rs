//! Config-driven experiment runs with JSON records and CSV artifacts.

pub mod catalog;
pub mod config;
mod pipelines;

use crate::error::{LabError, Result};
use catalog::Kind;
use config::ExperimentConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const RECORD_SCHEMA_VERSION: u32 = 1;
pub const RECORD_FILE: &str = "record.json";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    /// Passes when value ≤ threshold.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), pass: value <= threshold, value, threshold }
    }

    /// Passes when value ≥ threshold.
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), pass: value >= threshold, value, threshold }
    }

    pub fn flag(name: &str, pass: bool) -> Check {
        Check { name: name.into(), pass, value: pass as u8 as f64, threshold: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub kind: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
    pub failure: Option<String>,
    pub exit_code: i32,
}

/// Output directory that records a digest for every file written.
pub struct ArtifactSink {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl ArtifactSink {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ArtifactSink { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    fn register(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.dir.join(name))?;
        let digest = Sha256::digest(&bytes);
        self.artifacts.push(Artifact { file: name.into(), sha256: hex::encode(digest), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name)).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(&r).map_err(csv_err)?;
        }
        w.flush()?;
        drop(w);
        self.register(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| LabError::Numerical(e.to_string()))?;
        std::fs::write(self.dir.join(name), text)?;
        self.register(name)
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(std::io::Error::other(e.to_string()))
}

/// Exit status for a failed pipeline: refusals and numerical failures are 2, everything else 1.
pub fn exit_code_for(e: &LabError) -> i32 {
    match e {
        LabError::Refused(_) | LabError::Numerical(_) | LabError::Capability(_) => 2,
        _ => 1,
    }
}

/// Loads, validates and runs one experiment, writing artifacts and `record.json` into `out`.
pub fn run_experiment(kind: Kind, config_path: &Path, out: Option<&Path>) -> Result<RunRecord> {
    let cfg = ExperimentConfig::load(config_path)?;
    cfg.validate(kind)?;
    let out_dir = out.map(Path::to_path_buf).or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("lab-out").join(kind.name()));
    run_config(kind, &cfg, &out_dir)
}

/// Runs an already validated config.
pub fn run_config(kind: Kind, cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunRecord> {
    let mut sink = ArtifactSink::new(out_dir)?;
    let mut checks = Vec::new();
    let start = Instant::now();
    let outcome = pipelines::dispatch(kind, cfg, &mut sink, &mut checks);
    let wall_time_s = start.elapsed().as_secs_f64();
    let (failure, exit_code) = match &outcome {
        Ok(()) => (None, if checks.iter().all(|c| c.pass) { 0 } else { 2 }),
        Err(e) => (Some(e.to_string()), exit_code_for(e)),
    };
    let record = RunRecord {
        schema_version: RECORD_SCHEMA_VERSION,
        kind: kind.name().into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(cfg).map_err(|e| LabError::Numerical(e.to_string()))?,
        wall_time_s,
        checks,
        artifacts: sink.artifacts().to_vec(),
        failure,
        exit_code,
    };
    let text = serde_json::to_string_pretty(&record).map_err(|e| LabError::Numerical(e.to_string()))?;
    std::fs::write(out_dir.join(RECORD_FILE), text)?;
    Ok(record)
}
