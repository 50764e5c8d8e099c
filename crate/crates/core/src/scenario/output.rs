//! CSV, JSON summary and manifest writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::runner::MartingaleSeries;
use crate::engine::{LindbladRecord, TrajectoryRecord};
use crate::error::{Error, Result};

/// Environment variable that replaces `outputs.dir`.
pub const OUTPUT_DIR_ENV: &str = "QSYNC_OUTPUT_DIR";

/// Output directory after the environment override.
pub fn resolve_output_dir(configured: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => configured.to_path_buf(),
    }
}

fn header(n_sites: usize, labels: &[String]) -> String {
    let mut h = String::from("time");
    for j in 1..=n_sites {
        let _ = write!(h, ",site_{j}");
    }
    for l in labels {
        let _ = write!(h, ",overlap_{l}");
    }
    h.push('\n');
    h
}

fn push_row(out: &mut String, t: f64, obs: &[f64], ov: &[f64]) {
    let _ = write!(out, "{t:.16e}");
    for x in obs.iter().chain(ov) {
        let _ = write!(out, ",{x:.16e}");
    }
    out.push('\n');
}

/// `time, site_1..site_N, overlap_<label>...` with 17 significant digits.
pub fn series_csv(
    times: &[f64],
    observables: &[Vec<f64>],
    overlaps: &[Vec<f64>],
    labels: &[String],
    stride: usize,
) -> String {
    let n_sites = observables.first().map_or(0, |o| o.len());
    let mut out = header(n_sites, labels);
    for k in (0..times.len()).step_by(stride.max(1)) {
        push_row(&mut out, times[k], &observables[k], &overlaps[k]);
    }
    out
}

pub fn trajectory_csv(rec: &TrajectoryRecord, labels: &[String], stride: usize) -> String {
    series_csv(&rec.times, &rec.observables, &rec.overlaps, labels, stride)
}

pub fn lindblad_csv(rec: &LindbladRecord, labels: &[String], stride: usize) -> String {
    series_csv(&rec.times, &rec.observables, &rec.overlaps, labels, stride)
}

/// `time, mean_<label>..., se_<label>...`.
pub fn martingale_csv(m: &MartingaleSeries, labels: &[String], stride: usize) -> String {
    let mut out = String::from("time");
    for l in labels {
        let _ = write!(out, ",mean_{l}");
    }
    for l in labels {
        let _ = write!(out, ",se_{l}");
    }
    out.push('\n');
    for k in (0..m.times.len()).step_by(stride.max(1)) {
        push_row(&mut out, m.times[k], &m.mean[k], &m.standard_error[k]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Collects written files and their digests relative to a root directory.
pub struct OutputWriter {
    root: PathBuf,
    pub files: Vec<FileDigest>,
}

impl OutputWriter {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root.display().to_string(), e))?;
        Ok(OutputWriter {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, relative: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.files.push(FileDigest {
            path: relative.to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, relative: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
        self.write(relative, text.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    /// The validated configuration, re-serialized.
    pub config: String,
    pub code_version: String,
    pub seed: u64,
    /// Noise stream of every trajectory, per sweep point.
    pub stream_ids: Vec<Vec<u64>>,
    pub worker_threads: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileDigest>,
}
