//! Preset catalogue and command implementations behind the `qsync` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qsync_core::analysis::stats::mean_estimate;
use qsync_core::engine::Trapping;
use qsync_core::scenario::{run_scenario, ScenarioConfig, ScenarioOutcome, SweepConfig};
use qsync_core::{Error, Result};

/// Scenario files shipped with the binary.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig1-superposition", include_str!("../presets/fig1-superposition.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3a", include_str!("../presets/fig3a.toml")),
    ("fig3c", include_str!("../presets/fig3c.toml")),
    ("zeno", include_str!("../presets/zeno.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = preset_text(name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        Error::config(format!("unknown preset '{name}' (available: {})", names.join(", ")))
    })?;
    ScenarioConfig::from_toml(text)
}

/// A path to a TOML file, or the name of a preset.
pub fn load_scenario(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.exists() {
        ScenarioConfig::from_file(path)
    } else if preset_text(arg).is_some() {
        preset(arg)
    } else {
        Err(Error::config(format!("'{arg}' is neither a file nor a preset")))
    }
}

/// Process exit code for an error: 2 for configuration, 3 for numerics.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        2
    } else {
        3
    }
}

/// One row of the synchronization-time table.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncTimeRow {
    pub gamma: f64,
    pub count: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub standard_error: Option<f64>,
    pub trapped_dfs: usize,
    pub trapped_complement: usize,
    pub undecided: usize,
}

/// Runs `base` once per `gammas` entry and tabulates DFS hitting times.
pub fn sweep_sync_time(
    base: &ScenarioConfig,
    gammas: &[f64],
    out_dir: Option<&Path>,
) -> Result<(Vec<SyncTimeRow>, ScenarioOutcome)> {
    if gammas.is_empty() {
        return Err(Error::config("--gammas needs at least one value"));
    }
    let mut cfg = base.clone();
    let mut sweep = cfg.sweep.take().unwrap_or(SweepConfig {
        weights: Vec::new(),
        noise_kinds: Vec::new(),
        gammas: Vec::new(),
    });
    if !sweep.weights.is_empty() || sweep.noise_kinds.len() > 1 {
        return Err(Error::config("sweep-sync-time takes a scenario without weight or noise sweeps"));
    }
    sweep.gammas = gammas.to_vec();
    cfg.sweep = Some(sweep);
    let outcome = run_scenario(&cfg, out_dir)?;
    let rows = outcome
        .summary
        .points
        .iter()
        .map(|p| {
            let hits: Vec<f64> = p
                .trajectories
                .iter()
                .filter(|t| matches!(t.trapped_in, Trapping::Dfs(_)))
                .filter_map(|t| t.hitting_time)
                .collect();
            let est = mean_estimate(&hits);
            let count_of = |f: fn(&Trapping) -> bool| p.trajectories.iter().filter(|t| f(&t.trapped_in)).count();
            SyncTimeRow {
                gamma: p.gamma,
                count: hits.len(),
                mean: est.map(|e| e.mean),
                variance: est.map(|e| e.variance),
                standard_error: est.map(|e| e.standard_error),
                trapped_dfs: count_of(|t| matches!(t, Trapping::Dfs(_))),
                trapped_complement: count_of(|t| matches!(t, Trapping::Complement)),
                undecided: count_of(|t| matches!(t, Trapping::Undecided)),
            }
        })
        .collect();
    Ok((rows, outcome))
}

pub fn sync_time_csv(rows: &[SyncTimeRow]) -> String {
    let mut out =
        String::from("gamma,count,mean_tau,var_tau,se_tau,trapped_dfs,trapped_complement,undecided\n");
    let opt = |x: Option<f64>| x.map_or("nan".to_string(), |v| format!("{v:.16e}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{:.16e},{},{},{},{},{},{},{}",
            r.gamma,
            r.count,
            opt(r.mean),
            opt(r.variance),
            opt(r.standard_error),
            r.trapped_dfs,
            r.trapped_complement,
            r.undecided
        );
    }
    out
}

/// Output directory: the command-line value, else the environment
/// override, else the configured one.
pub fn output_dir(cli: Option<PathBuf>, cfg: &ScenarioConfig) -> PathBuf {
    cli.unwrap_or_else(|| qsync_core::scenario::resolve_output_dir(&cfg.outputs.dir))
}
