//! Ensemble execution and reduction.
//!
//! Trajectories run in parallel in fixed-size chunks; each chunk is folded
//! into the accumulators in id order, so every reported number is
//! independent of the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, SweepPoint};
use crate::analysis::ergodicity::{complement_preflight, ergodicity_fidelity, ErgodicityReport};
use crate::analysis::stats::{
    hitting_time_stats, multiplexing_report, stationary_histogram, FrequencyHistogram,
    HittingTimeStats, StationaryHistogram,
};
use crate::analysis::sync::{detect_sync, site_pattern, SyncVerdict};
use crate::chain::{realize_initial_state, ChainModel};
use crate::dfs::DfsDecomposition;
use crate::engine::steppers::unitary_propagator;
use crate::engine::trajectory::evolve_with_propagator;
use crate::engine::{
    evolve_lindblad, LindbladRecord, NoiseKind, RecordOptions, TrajectoryRecord, Trapping,
    Workspace,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::state::PureEnsemble;

/// Trajectories evaluated per parallel chunk.
pub const CHUNK: usize = 64;

/// Step halvings attempted after a step-size error.
pub const MAX_HALVINGS: u32 = 3;

/// Model, decomposition, working space and initial ensemble of one point.
pub struct Prepared {
    pub config: ScenarioConfig,
    pub model: ChainModel,
    pub dfs: DfsDecomposition,
    pub workspace: Workspace,
    pub initial: PureEnsemble,
    /// Initial block weights, complement last.
    pub weights: Vec<f64>,
    pub dt: f64,
}

pub fn prepare(config: &ScenarioConfig) -> Result<Prepared> {
    config.validate()?;
    let model = ChainModel::build(config.model)?;
    let dfs = model.dfs()?;
    let full = realize_initial_state(&config.initial, &model, &dfs)?;
    let (workspace, initial) = Workspace::for_ensemble(&model, &dfs, &full)?;
    let weights = workspace.overlaps_ensemble(&initial.members);
    let dt = config.integrator.step(config.model.gamma);
    Ok(Prepared {
        config: config.clone(),
        model,
        dfs,
        workspace,
        initial,
        weights,
        dt,
    })
}

/// Outcome of a synchronization test on one series pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum SyncOutcome {
    Tested(SyncVerdict),
    /// Window too short or otherwise unusable.
    Skipped { reason: String },
}

impl SyncOutcome {
    pub fn verdict(&self) -> Option<&SyncVerdict> {
        match self {
            SyncOutcome::Tested(v) => Some(v),
            SyncOutcome::Skipped { .. } => None,
        }
    }

    pub fn synchronized(&self) -> bool {
        self.verdict().is_some_and(|v| v.synchronized)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub id: u64,
    pub stream_id: u64,
    pub trapped_in: Trapping,
    pub hitting_time: Option<f64>,
    pub sync: SyncOutcome,
    /// Signed per-site amplitudes at the synchronized frequency.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub site_pattern: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    pub max_purity_drift: f64,
    /// Per block: lowest overlap after absorption, when absorption happened.
    pub absorption_floor: Vec<Option<f64>>,
    pub dt: f64,
    pub t_end: f64,
}

/// Time-resolved ensemble mean of the block weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSeries {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub standard_error: Vec<Vec<f64>>,
}

impl MartingaleSeries {
    /// Largest `|mean - initial| / SE` per block; zero SE demands equality.
    pub fn max_z(&self, initial: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0f64; initial.len()];
        for (m, s) in self.mean.iter().zip(&self.standard_error) {
            for k in 0..initial.len() {
                let d = (m[k] - initial[k]).abs();
                let z = if s[k] > 0.0 {
                    d / s[k]
                } else if d <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                };
                out[k] = out[k].max(z);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnravelingCheck {
    pub time: f64,
    pub trace_distance: f64,
    /// `5 / √M`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub scenario: String,
    pub point: SweepPoint,
    pub noise_kind: NoiseKind,
    pub gamma: f64,
    pub ensemble_size: usize,
    pub dt: f64,
    pub t_final: f64,
    pub labels: Vec<String>,
    pub block_c: Vec<f64>,
    pub block_frequencies: Vec<Vec<f64>>,
    pub initial_overlaps: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trapping: Option<StationaryHistogram>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trapping_z: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub martingale_max_z: Vec<f64>,
    pub synchronized: usize,
    pub sync_skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_histogram: Option<FrequencyHistogram>,
    pub hitting_times: HittingTimeStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ergodicity: Option<ErgodicityReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unraveling: Vec<UnravelingCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lindblad_sync: Option<SyncOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lindblad_trace_drift: Option<f64>,
    pub max_purity_drift: f64,
    /// Records whose overlap fell below `1 - 1e-5` after absorption.
    pub absorption_violations: usize,
    pub trajectories: Vec<TrajectorySummary>,
}

/// Everything one sweep point produces.
pub struct PointOutcome {
    pub summary: EnsembleSummary,
    /// Full records of the lowest ids, as requested by the outputs section.
    pub kept: Vec<TrajectoryRecord>,
    pub lindblad: Option<LindbladRecord>,
    pub martingale: MartingaleSeries,
    pub labels: Vec<String>,
}

/// Level below which an absorbed overlap counts as having left the fixed point.
pub const ABSORPTION_TOLERANCE: f64 = 1e-5;

struct Accumulator {
    n_samples: usize,
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
    times: Vec<f64>,
    snapshot_sums: Vec<(f64, CMatrix)>,
    summaries: Vec<TrajectorySummary>,
    kept: Vec<TrajectoryRecord>,
    trappings: Vec<Trapping>,
    time_averages: Vec<Option<CMatrix>>,
}

impl Accumulator {
    fn absorb(&mut self, rec: TrajectoryRecord, summary: TrajectorySummary, keep: bool) {
        let nb = self.sum.first().map_or(0, |r| r.len());
        for s in 0..self.n_samples {
            let row = rec.overlaps.get(s).or(rec.overlaps.last());
            if let Some(row) = row {
                for k in 0..nb {
                    self.sum[s][k] += row[k];
                    self.sum_sq[s][k] += row[k] * row[k];
                }
            }
        }
        if self.times.len() < rec.times.len() {
            self.times.clone_from(&rec.times);
        }
        for (slot, (t, m)) in self.snapshot_sums.iter_mut().zip(&rec.snapshots) {
            slot.0 = *t;
            slot.1 += m;
        }
        self.trappings.push(rec.trapped_in);
        self.time_averages.push(rec.time_average.clone());
        self.summaries.push(summary);
        if keep {
            self.kept.push(rec);
        }
    }
}

fn sync_window(cfg: &ScenarioConfig, rec: &TrajectoryRecord) -> (f64, f64) {
    let t_final = cfg.integrator.t_final;
    let mut start = t_final * (1.0 - cfg.analysis.sync_window_fraction);
    if let (Trapping::Dfs(_), Some(hit)) = (rec.trapped_in, rec.hitting_time) {
        start = start.max(hit + cfg.trapping.dwell);
    }
    (start, rec.t_end)
}

fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

/// Synchronization test between the configured sites of a sampled series.
pub fn sync_of_series(
    cfg: &ScenarioConfig,
    times: &[f64],
    observables: &[Vec<f64>],
    window: (f64, f64),
) -> SyncOutcome {
    let (a, b) = cfg.sync_sites();
    match detect_sync(
        times,
        &column(observables, a - 1),
        &column(observables, b - 1),
        window,
        &cfg.analysis.sync,
    ) {
        Ok(v) => SyncOutcome::Tested(v),
        Err(e) => SyncOutcome::Skipped {
            reason: e.to_string(),
        },
    }
}

fn summarize(p: &Prepared, rec: &TrajectoryRecord, dt: f64) -> TrajectorySummary {
    let cfg = &p.config;
    let window = sync_window(cfg, rec);
    let sync = sync_of_series(cfg, &rec.times, &rec.observables, window);
    let pattern = match (&sync, cfg.analysis.site_pattern) {
        (SyncOutcome::Tested(v), true) if v.synchronized => {
            let r = crate::analysis::sync::window_indices(&rec.times, window.0, window.1);
            let t = &rec.times[r.clone()];
            let sites: Vec<Vec<f64>> = (0..p.model.params.n)
                .map(|j| rec.observables[r.clone()].iter().map(|o| o[j]).collect())
                .collect();
            Some(site_pattern(t, &sites, v.frequency.unwrap_or(0.0), cfg.analysis.sync.min_amplitude))
        }
        _ => None,
    };
    TrajectorySummary {
        id: rec.id,
        stream_id: cfg.integrator.stream_id.wrapping_add(rec.id),
        trapped_in: rec.trapped_in,
        hitting_time: rec.hitting_time,
        sync,
        site_pattern: pattern,
        fidelity: None,
        max_purity_drift: rec.max_purity_drift,
        absorption_floor: rec.absorption_floor.clone(),
        dt,
        t_end: rec.t_end,
    }
}

fn run_one(p: &Prepared, u: &CMatrix, options: &RecordOptions, id: u64) -> Result<(TrajectoryRecord, f64)> {
    let cfg = &p.config;
    let mut dt = p.dt;
    let mut propagator = None;
    for halving in 0..=MAX_HALVINGS {
        let u_now = propagator.as_ref().unwrap_or(u);
        let r = evolve_with_propagator(
            &p.workspace,
            u_now,
            &p.initial,
            cfg.noise_kind,
            &cfg.integrator,
            dt,
            &cfg.trapping,
            options,
            id,
        );
        match r {
            Ok(rec) => return Ok((rec, dt)),
            Err(Error::Trajectory { source, .. })
                if matches!(*source, Error::StepSize { .. }) && halving < MAX_HALVINGS =>
            {
                log::warn!("trajectory {id}: {source}; halving dt to {}", dt / 2.0);
                dt /= 2.0;
                if crate::engine::trajectory::stride(cfg.integrator.sample_every, dt).is_err() {
                    return Err(Error::Trajectory { id, source });
                }
                propagator = Some(unitary_propagator(&p.workspace.hamiltonian, dt)?);
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("the last halving returns")
}

/// Lindblad reference of a prepared point.
pub fn run_lindblad(p: &Prepared) -> Result<LindbladRecord> {
    let cfg = &p.config;
    let ldt = cfg.integrator.lindblad_dt.unwrap_or(p.dt);
    let rho0 = p.initial.to_density();
    evolve_lindblad(
        &p.workspace,
        &rho0,
        ldt,
        cfg.integrator.t_final,
        cfg.integrator.sample_every,
        cfg.analysis.average_fraction,
        &cfg.analysis.compare_times,
    )
}

/// Runs one (sweep-free) scenario point.
pub fn run_point(config: &ScenarioConfig, point: SweepPoint) -> Result<PointOutcome> {
    let p = prepare(config)?;
    let cfg = &p.config;
    let ws = &p.workspace;
    let labels = ws.labels();
    let quantum_avg = cfg.analysis.average_fraction.is_some() && cfg.noise_kind != NoiseKind::LindbladOnly;
    if quantum_avg {
        complement_preflight(ws)?;
    }
    let lindblad = if cfg.analysis.lindblad || cfg.noise_kind == NoiseKind::LindbladOnly {
        Some(run_lindblad(&p)?)
    } else {
        None
    };

    let mut acc = Accumulator {
        n_samples: 0,
        sum: Vec::new(),
        sum_sq: Vec::new(),
        times: Vec::new(),
        snapshot_sums: cfg
            .analysis
            .compare_times
            .iter()
            .map(|&t| (t, CMatrix::zeros(ws.dim(), ws.dim())))
            .collect(),
        summaries: Vec::new(),
        kept: Vec::new(),
        trappings: Vec::new(),
        time_averages: Vec::new(),
    };
    let m = if cfg.noise_kind == NoiseKind::LindbladOnly { 0 } else { cfg.ensemble_size };
    if m > 0 {
        let every = crate::engine::trajectory::stride(cfg.integrator.sample_every, p.dt)?;
        let steps = (cfg.integrator.t_final / p.dt).round() as usize;
        acc.n_samples = steps / every + 1;
        acc.sum = vec![vec![0.0; ws.n_overlaps()]; acc.n_samples];
        acc.sum_sq = acc.sum.clone();
    }
    let options = RecordOptions {
        average_fraction: cfg.analysis.average_fraction,
        snapshot_times: cfg.analysis.compare_times.clone(),
        keep_increments: false,
    };
    let u = unitary_propagator(&ws.hamiltonian, p.dt)?;
    let ids: Vec<u64> = (0..m as u64).collect();
    for chunk in ids.chunks(CHUNK) {
        let results: Vec<Result<(TrajectoryRecord, TrajectorySummary)>> = chunk
            .par_iter()
            .map(|&id| {
                let (rec, dt) = run_one(&p, &u, &options, id)?;
                let s = summarize(&p, &rec, dt);
                Ok((rec, s))
            })
            .collect();
        for r in results {
            let (rec, s) = r?;
            let keep = (rec.id as usize) < cfg.outputs.trajectories;
            acc.absorb(rec, s, keep);
        }
    }

    let mut summary = EnsembleSummary {
        scenario: cfg.name.clone(),
        point,
        noise_kind: cfg.noise_kind,
        gamma: cfg.model.gamma,
        ensemble_size: m,
        dt: p.dt,
        t_final: cfg.integrator.t_final,
        labels: labels.clone(),
        block_c: ws.blocks.iter().map(|b| b.c).collect(),
        block_frequencies: ws.blocks.iter().map(|b| b.bohr_frequencies.clone()).collect(),
        initial_overlaps: p.weights.clone(),
        trapping: None,
        trapping_z: Vec::new(),
        martingale_max_z: Vec::new(),
        synchronized: 0,
        sync_skipped: 0,
        frequency_histogram: None,
        hitting_times: hitting_time_stats(&[], 0),
        ergodicity: None,
        unraveling: Vec::new(),
        lindblad_sync: None,
        lindblad_trace_drift: lindblad.as_ref().map(|l| l.max_trace_drift),
        max_purity_drift: 0.0,
        absorption_violations: 0,
        trajectories: Vec::new(),
    };

    if let Some(l) = &lindblad {
        let window = (cfg.integrator.t_final * (1.0 - cfg.analysis.sync_window_fraction), cfg.integrator.t_final);
        summary.lindblad_sync = Some(sync_of_series(cfg, &l.times, &l.observables, window));
    }

    let martingale = finish_martingale(&acc, m);
    if m > 0 {
        let hist = stationary_histogram(&acc.trappings, &labels)?;
        summary.trapping_z = hist.z_scores(&p.weights);
        summary.trapping = Some(hist);
        summary.martingale_max_z = martingale.max_z(&p.weights);
        summary.synchronized = acc.summaries.iter().filter(|s| s.sync.synchronized()).count();
        summary.sync_skipped = acc
            .summaries
            .iter()
            .filter(|s| matches!(s.sync, SyncOutcome::Skipped { .. }))
            .count();
        let freqs: Vec<Option<f64>> = acc
            .summaries
            .iter()
            .map(|s| s.sync.verdict().and_then(|v| v.frequency))
            .collect();
        let mut references: Vec<f64> = ws.blocks.iter().flat_map(|b| b.bohr_frequencies.clone()).collect();
        references.sort_by(f64::total_cmp);
        references.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
        summary.frequency_histogram = Some(multiplexing_report(
            &freqs,
            &references,
            cfg.analysis.sync.frequency_rel,
        ));
        let hits: Vec<f64> = acc
            .summaries
            .iter()
            .filter(|s| matches!(s.trapped_in, Trapping::Dfs(_)))
            .filter_map(|s| s.hitting_time)
            .collect();
        summary.hitting_times = hitting_time_stats(&hits, cfg.analysis.hitting_time_bins);
        summary.max_purity_drift = acc.summaries.iter().map(|s| s.max_purity_drift).fold(0.0, f64::max);
        summary.absorption_violations = acc
            .summaries
            .iter()
            .filter(|s| {
                s.absorption_floor
                    .iter()
                    .flatten()
                    .any(|&f| f < 1.0 - ABSORPTION_TOLERANCE)
            })
            .count();
        if let (Some(l), true) = (&lindblad, !acc.snapshot_sums.is_empty()) {
            for ((t, sum), (_, reference)) in acc.snapshot_sums.iter().zip(&l.snapshots) {
                let mean = sum.unscale(m as f64);
                summary.unraveling.push(UnravelingCheck {
                    time: *t,
                    trace_distance: linalg::trace_distance(&mean, reference),
                    bound: 5.0 / (m as f64).sqrt(),
                });
            }
        }
        if let (true, Some(steady)) = (quantum_avg, lindblad.as_ref().and_then(|l| l.time_average.as_ref())) {
            let tr = steady.trace().re;
            let report = ergodicity_fidelity(&acc.time_averages, &steady.unscale(tr), &p.weights)?;
            for (s, f) in acc.summaries.iter_mut().zip(&report.per_trajectory) {
                s.fidelity = Some(*f);
            }
            summary.ergodicity = Some(report);
        }
    }
    summary.trajectories = acc.summaries;
    Ok(PointOutcome {
        summary,
        kept: acc.kept,
        lindblad,
        martingale,
        labels,
    })
}

fn finish_martingale(acc: &Accumulator, m: usize) -> MartingaleSeries {
    if m == 0 {
        return MartingaleSeries::default();
    }
    let mf = m as f64;
    let mut series = MartingaleSeries {
        times: acc.times.clone(),
        ..Default::default()
    };
    for (s, s2) in acc.sum.iter().zip(&acc.sum_sq) {
        let mean: Vec<f64> = s.iter().map(|x| x / mf).collect();
        let se = s2
            .iter()
            .zip(&mean)
            .map(|(q, mu)| {
                if m > 1 {
                    ((q / mf - mu * mu).max(0.0) * mf / (mf - 1.0) / mf).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        series.mean.push(mean);
        series.standard_error.push(se);
    }
    series
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainParams, InitialKind, InitialStateSpec, InitialTerm};
    use crate::engine::{IntegratorConfig, TrappingConfig};
    use crate::scenario::config::{AnalysisConfig, OutputConfig};

    fn small(kind: NoiseKind, m: usize) -> ScenarioConfig {
        let mut integrator = IntegratorConfig::new(4.0);
        integrator.dt = Some(1e-3);
        integrator.seed = 9;
        ScenarioConfig {
            name: "small".into(),
            description: String::new(),
            noise_kind: kind,
            ensemble_size: m,
            model: ChainParams::new(5, 1.0, 3),
            initial: InitialStateSpec {
                kind: InitialKind::Superposition,
                terms: vec![
                    InitialTerm::dfs(1.0, Some(3)).with_amplitude(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                    InitialTerm::complement(3).with_amplitude(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                ],
            },
            integrator,
            trapping: TrappingConfig::default(),
            analysis: AnalysisConfig {
                compare_times: vec![2.0],
                ..Default::default()
            },
            outputs: OutputConfig {
                trajectories: 2,
                ..Default::default()
            },
            sweep: None,
        }
    }

    #[test]
    fn point_is_deterministic_and_consistent() {
        let cfg = small(NoiseKind::QuantumHomodyne, 20);
        let a = run_point(&cfg, SweepPoint { weight: None, noise_kind: None, gamma: None }).unwrap();
        let b = run_point(&cfg, SweepPoint { weight: None, noise_kind: None, gamma: None }).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.kept.len(), 2);
        assert_eq!(a.summary.trajectories.len(), 20);
        let w = &a.summary.initial_overlaps;
        assert!((w[0] - 0.5).abs() < 1e-10 && (w[1] - 0.5).abs() < 1e-10);
        // the first sample is the initial state for every trajectory
        assert!((a.martingale.mean[0][0] - 0.5).abs() < 1e-10);
        assert_eq!(a.martingale.standard_error[0][0], 0.0);
        assert_eq!(a.summary.unraveling.len(), 1);
        assert!(a.summary.lindblad_trace_drift.unwrap() < 1e-9);
    }

    #[test]
    fn lindblad_only_runs_no_trajectories() {
        let cfg = small(NoiseKind::LindbladOnly, 5);
        let out = run_point(&cfg, SweepPoint { weight: None, noise_kind: None, gamma: None }).unwrap();
        assert!(out.summary.trajectories.is_empty());
        assert!(out.lindblad.is_some());
        assert!(out.summary.trapping.is_none());
    }

    #[test]
    fn martingale_z_handles_zero_error() {
        let s = MartingaleSeries {
            times: vec![0.0, 1.0],
            mean: vec![vec![0.4, 0.6], vec![0.5, 0.5]],
            standard_error: vec![vec![0.0, 0.0], vec![0.05, 0.05]],
        };
        let z = s.max_z(&[0.4, 0.6]);
        assert!((z[0] - 2.0).abs() < 1e-12);
    }
}
