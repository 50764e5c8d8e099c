//! Scenario configuration, ensemble execution and result files.

pub mod config;
pub mod output;
pub mod runner;

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use config::{AnalysisConfig, OutputConfig, ScenarioConfig, SweepConfig, SweepPoint};
pub use output::{resolve_output_dir, RunManifest, OUTPUT_DIR_ENV};
pub use runner::{prepare, run_point, EnsembleSummary, PointOutcome, Prepared, SyncOutcome};

use crate::error::Result;
use output::{lindblad_csv, martingale_csv, trajectory_csv, OutputWriter};

/// Summary of every sweep point of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub points: Vec<EnsembleSummary>,
}

pub struct ScenarioOutcome {
    pub summary: ScenarioSummary,
    pub manifest: RunManifest,
}

/// Runs every sweep point and, when `out_dir` is given, writes per-point CSV
/// files, `summary.json` and `manifest.json` there.
pub fn run_scenario(config: &ScenarioConfig, out_dir: Option<&Path>) -> Result<ScenarioOutcome> {
    config.validate()?;
    let started = Instant::now();
    let started_unix_seconds = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut writer = out_dir.map(OutputWriter::new).transpose()?;
    let points = config.sweep_points();
    let mut summaries = Vec::with_capacity(points.len());
    let mut stream_ids = Vec::with_capacity(points.len());
    for point in points {
        let tag = point.tag();
        let cfg = config.at(&point);
        log::info!("{}: running point '{tag}'", config.name);
        let outcome = run_point(&cfg, point)?;
        if let Some(w) = writer.as_mut() {
            let prefix = if tag.is_empty() { String::new() } else { format!("{tag}/") };
            let stride = cfg.outputs.stride;
            for rec in &outcome.kept {
                w.write(
                    &format!("{prefix}trajectory_{:04}.csv", rec.id),
                    trajectory_csv(rec, &outcome.labels, stride).as_bytes(),
                )?;
            }
            if let Some(l) = &outcome.lindblad {
                w.write(
                    &format!("{prefix}lindblad.csv"),
                    lindblad_csv(l, &outcome.labels, stride).as_bytes(),
                )?;
            }
            if !outcome.martingale.times.is_empty() {
                w.write(
                    &format!("{prefix}mean_overlaps.csv"),
                    martingale_csv(&outcome.martingale, &outcome.labels, stride).as_bytes(),
                )?;
            }
        }
        stream_ids.push(
            outcome
                .summary
                .trajectories
                .iter()
                .map(|t| t.stream_id)
                .collect(),
        );
        summaries.push(outcome.summary);
    }
    let summary = ScenarioSummary {
        scenario: config.name.clone(),
        points: summaries,
    };
    let mut manifest = RunManifest {
        scenario: config.name.clone(),
        config: config.to_toml()?,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.integrator.seed,
        stream_ids,
        worker_threads: rayon::current_num_threads(),
        started_unix_seconds,
        wall_clock_seconds: 0.0,
        files: Vec::new(),
    };
    if let Some(w) = writer.as_mut() {
        w.write_json("summary.json", &summary)?;
        manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
        manifest.files = w.files.clone();
        w.write_json("manifest.json", &manifest)?;
    } else {
        manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    }
    Ok(ScenarioOutcome { summary, manifest })
}
