//! Single-trajectory integration with sampling and trapping classification.

use serde::{Deserialize, Serialize};

use super::noise::NoiseStream;
use super::steppers::{self, kraus_step_with, strang_step_with, DiagonalLevels};
use super::workspace::{add_scaled, Workspace};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::state::{PureEnsemble, QuantumState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    QuantumHomodyne,
    ClassicalStratonovich,
    LindbladOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Gaussian Kraus update plus exact propagator (homodyne default).
    SplitKraus,
    /// Literal Euler–Maruyama Itô SSE.
    EulerMaruyama,
    /// Strang splitting of the stochastic unitary (classical-noise default).
    SplitUnitary,
    /// Literal Heun Stratonovich scheme.
    Heun,
    /// Runge–Kutta 4 for the Lindblad equation.
    Rk4,
}

impl Scheme {
    pub fn default_for(kind: NoiseKind) -> Scheme {
        match kind {
            NoiseKind::QuantumHomodyne => Scheme::SplitKraus,
            NoiseKind::ClassicalStratonovich => Scheme::SplitUnitary,
            NoiseKind::LindbladOnly => Scheme::Rk4,
        }
    }

    pub fn supports(self, kind: NoiseKind) -> bool {
        matches!(
            (self, kind),
            (Scheme::SplitKraus | Scheme::EulerMaruyama, NoiseKind::QuantumHomodyne)
                | (Scheme::SplitUnitary | Scheme::Heun, NoiseKind::ClassicalStratonovich)
                | (Scheme::Rk4, NoiseKind::LindbladOnly)
        )
    }
}

/// Default step for reduced measurement strength `gamma`.
pub fn default_dt(gamma: f64) -> f64 {
    if gamma > 1.0 {
        1e-3 / gamma
    } else {
        1e-3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Step in units of `1/J`; chosen from `gamma` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default = "yes")]
    pub renormalize_every_step: bool,
    #[serde(default)]
    pub seed: u64,
    /// Stream of trajectory 0; trajectory `k` uses `stream_id + k`.
    #[serde(default)]
    pub stream_id: u64,
    /// Each increment sums `2^noise_refinement` finer Gaussian draws.
    #[serde(default)]
    pub noise_refinement: u32,
    #[serde(default = "default_sample_every")]
    pub sample_every: f64,
    /// Step of the Lindblad reference; `dt` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad_dt: Option<f64>,
}

fn yes() -> bool {
    true
}

fn default_sample_every() -> f64 {
    0.05
}

impl IntegratorConfig {
    pub fn new(t_final: f64) -> Self {
        IntegratorConfig {
            dt: None,
            t_final,
            scheme: None,
            renormalize_every_step: true,
            seed: 0,
            stream_id: 0,
            noise_refinement: 0,
            sample_every: default_sample_every(),
            lindblad_dt: None,
        }
    }

    pub fn step(&self, gamma: f64) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(gamma))
    }

    pub fn validate(&self, gamma: f64) -> Result<()> {
        let dt = self.step(gamma);
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!("dt = {dt} must be positive")));
        }
        if !(self.t_final.is_finite() && self.t_final >= dt) {
            return Err(Error::config(format!(
                "t_final = {} must be at least dt = {dt}",
                self.t_final
            )));
        }
        stride(self.sample_every, dt)?;
        if let Some(ldt) = self.lindblad_dt {
            if !(ldt.is_finite() && ldt > 0.0) {
                return Err(Error::config("lindblad_dt must be positive"));
            }
            stride(self.sample_every, ldt)?;
        }
        if self.noise_refinement > 16 {
            return Err(Error::config("noise_refinement above 16"));
        }
        Ok(())
    }
}

/// Steps per sample; the sampling interval must be a multiple of `dt`.
pub fn stride(sample_every: f64, dt: f64) -> Result<usize> {
    let ratio = sample_every / dt;
    let k = ratio.round();
    if !(k >= 1.0) || (ratio - k).abs() > 1e-6 * k {
        return Err(Error::config(format!(
            "sample_every = {sample_every} is not a multiple of dt = {dt}"
        )));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrappingConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Time an overlap must stay above `1 - epsilon` to count as trapped.
    #[serde(default = "default_dwell")]
    pub dwell: f64,
    #[serde(default)]
    pub stop_when_classified: bool,
}

fn default_epsilon() -> f64 {
    1e-3
}

fn default_dwell() -> f64 {
    1.0
}

impl Default for TrappingConfig {
    fn default() -> Self {
        TrappingConfig {
            epsilon: default_epsilon(),
            dwell: default_dwell(),
            stop_when_classified: false,
        }
    }
}

impl TrappingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::config("trapping epsilon must lie in (0, 0.5)"));
        }
        if !(self.dwell >= 0.0 && self.dwell.is_finite()) {
            return Err(Error::config("trapping dwell must be >= 0"));
        }
        Ok(())
    }
}

/// What to record besides the sampled series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordOptions {
    /// Fraction of the horizon (at its end) over which the state is averaged.
    pub average_fraction: Option<f64>,
    /// Times at which the full state is stored.
    pub snapshot_times: Vec<f64>,
    pub keep_increments: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "block")]
pub enum Trapping {
    /// Index into the workspace blocks.
    Dfs(usize),
    Complement,
    Undecided,
}

/// Overlap at which absorption into a fixed point is tracked.
pub const ABSORPTION_LEVEL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub id: u64,
    pub times: Vec<f64>,
    /// `<σ^z_j>` per sample, one row per time.
    pub observables: Vec<Vec<f64>>,
    /// Block weights per sample, complement last.
    pub overlaps: Vec<Vec<f64>>,
    /// Final state in working-space coordinates.
    pub final_state: QuantumState,
    pub trapped_in: Trapping,
    pub hitting_time: Option<f64>,
    /// Time-averaged state over the averaging window.
    pub time_average: Option<CMatrix>,
    pub snapshots: Vec<(f64, CMatrix)>,
    pub increments: Option<Vec<f64>>,
    /// Per block: lowest overlap seen after first reaching `1 - ABSORPTION_LEVEL`.
    pub absorption_floor: Vec<Option<f64>>,
    /// Largest `|purity(t) - purity(0)|` over the samples.
    pub max_purity_drift: f64,
    pub t_end: f64,
}

struct TrapTracker {
    epsilon: f64,
    dwell: f64,
    first_hit: Vec<Option<f64>>,
    streak_start: Vec<Option<f64>>,
    floor: Vec<Option<f64>>,
}

impl TrapTracker {
    fn new(n: usize, cfg: &TrappingConfig) -> Self {
        TrapTracker {
            epsilon: cfg.epsilon,
            dwell: cfg.dwell,
            first_hit: vec![None; n],
            streak_start: vec![None; n],
            floor: vec![None; n],
        }
    }

    fn update(&mut self, t: f64, overlaps: &[f64]) {
        for (k, &w) in overlaps.iter().enumerate() {
            if w >= 1.0 - self.epsilon {
                self.first_hit[k].get_or_insert(t);
                self.streak_start[k].get_or_insert(t);
            } else {
                self.streak_start[k] = None;
            }
            match &mut self.floor[k] {
                Some(f) => *f = f.min(w),
                None if w >= 1.0 - ABSORPTION_LEVEL => self.floor[k] = Some(w),
                None => {}
            }
        }
    }

    fn classified(&self, t: f64) -> Option<usize> {
        (0..self.streak_start.len())
            .find(|&k| self.streak_start[k].is_some_and(|s| t - s >= self.dwell - 1e-12))
    }
}

/// Integrates one trajectory of `kind` from `initial` (in working-space
/// coordinates). `id` offsets the noise stream.
#[allow(clippy::too_many_arguments)]
pub fn evolve_trajectory(
    ws: &Workspace,
    initial: &PureEnsemble,
    kind: NoiseKind,
    cfg: &IntegratorConfig,
    dt: f64,
    trapping: &TrappingConfig,
    options: &RecordOptions,
    id: u64,
) -> Result<TrajectoryRecord> {
    let u = steppers::unitary_propagator(&ws.hamiltonian, dt)?;
    evolve_with_propagator(ws, &u, initial, kind, cfg, dt, trapping, options, id)
}

/// As [`evolve_trajectory`] with a precomputed `exp(-iH dt)`.
#[allow(clippy::too_many_arguments)]
pub fn evolve_with_propagator(
    ws: &Workspace,
    u: &CMatrix,
    initial: &PureEnsemble,
    kind: NoiseKind,
    cfg: &IntegratorConfig,
    dt: f64,
    trapping: &TrappingConfig,
    options: &RecordOptions,
    id: u64,
) -> Result<TrajectoryRecord> {
    evolve_inner(ws, u, initial, kind, cfg, dt, trapping, options, id).map_err(|e| match e {
        Error::Trajectory { .. } => e,
        other => Error::Trajectory {
            id,
            source: Box::new(other),
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn evolve_inner(
    ws: &Workspace,
    u: &CMatrix,
    initial: &PureEnsemble,
    kind: NoiseKind,
    cfg: &IntegratorConfig,
    dt: f64,
    trapping: &TrappingConfig,
    options: &RecordOptions,
    id: u64,
) -> Result<TrajectoryRecord> {
    let scheme = cfg.scheme.unwrap_or(Scheme::default_for(kind));
    if kind == NoiseKind::LindbladOnly || !scheme.supports(kind) {
        return Err(Error::config(format!(
            "scheme {scheme:?} cannot integrate {kind:?} trajectories"
        )));
    }
    if matches!(scheme, Scheme::EulerMaruyama) && initial.members.len() != 1 {
        return Err(Error::UnsupportedMode(
            "euler-maruyama integrates pure states only; use split-kraus for mixtures".into(),
        ));
    }
    if initial.dim() != ws.dim() {
        return Err(Error::structural("initial state outside the working space"));
    }
    let steps = (cfg.t_final / dt).round() as usize;
    let every = stride(cfg.sample_every, dt)?;
    let avg_start = options
        .average_fraction
        .map(|f| cfg.t_final * (1.0 - f) - 1e-9 * cfg.t_final);
    let snapshot_steps: Vec<usize> = options
        .snapshot_times
        .iter()
        .map(|t| (t / dt).round() as usize)
        .collect();

    let mut noise = NoiseStream::new(cfg.seed, cfg.stream_id.wrapping_add(id), dt, cfg.noise_refinement);
    let mut members = initial.members.clone();
    let mut tracker = TrapTracker::new(ws.n_overlaps(), trapping);
    let mut buf = vec![0.0; ws.n_overlaps()];
    let mut buf2 = vec![0.0; ws.n_overlaps()];
    let mut scratch = crate::linalg::CVector::zeros(ws.dim());
    let levels = DiagonalLevels::new(&ws.l_diag);

    let n_samples = steps / every + 1;
    let mut times = Vec::with_capacity(n_samples);
    let mut observables = Vec::with_capacity(n_samples);
    let mut overlaps = Vec::with_capacity(n_samples);
    let mut average = avg_start.map(|_| (CMatrix::zeros(ws.dim(), ws.dim()), 0usize));
    let mut snapshots = Vec::new();
    let mut increments = options.keep_increments.then(|| Vec::with_capacity(steps));

    let (h, l) = (&ws.hamiltonian, &ws.measurement);
    let purity0 = ensemble_purity(&members);
    let mut max_purity_drift: f64 = 0.0;
    let mut t_end = 0.0;
    for step in 0..=steps {
        let t = step as f64 * dt;
        t_end = t;
        if members.len() == 1 {
            ws.overlaps_pure(&members[0].1, &mut buf);
        } else {
            ws.overlaps_ensemble_into(&members, &mut buf, &mut buf2);
        }
        tracker.update(t, &buf);
        if step % every == 0 {
            times.push(t);
            observables.push(ws.magnetizations(&ws.populations_ensemble(&members)));
            if let (Some((acc, count)), Some(start)) = (average.as_mut(), avg_start) {
                if t >= start {
                    add_scaled(acc, &Workspace::density(&members), 1.0);
                    *count += 1;
                }
            }
            overlaps.push(buf.clone());
            max_purity_drift = max_purity_drift.max((ensemble_purity(&members) - purity0).abs());
        }
        if snapshot_steps.contains(&step) {
            snapshots.push((t, Workspace::density(&members)));
        }
        if trapping.stop_when_classified && tracker.classified(t).is_some() {
            break;
        }
        if step == steps {
            break;
        }
        let dw = noise.next_increment();
        if let Some(inc) = increments.as_mut() {
            inc.push(dw);
        }
        let stepped = match scheme {
            Scheme::SplitKraus => {
                kraus_step_with(&mut members, u, &levels, dt, dw, &mut scratch).map(|_| ())
            }
            Scheme::SplitUnitary => {
                strang_step_with(&mut members, u, &levels, dw, &mut scratch);
                Ok(())
            }
            Scheme::EulerMaruyama => steppers::step_sse_raw(
                &members[0].1,
                h,
                l,
                dt,
                dw,
                cfg.renormalize_every_step,
            )
            .map(|v| members[0].1 = v),
            Scheme::Heun => members.iter_mut().try_for_each(|(_, psi)| {
                steppers::step_heun(psi, h, l, dt, dw, cfg.renormalize_every_step)
                    .map(|v| *psi = v)
            }),
            Scheme::Rk4 => unreachable!("rejected above"),
        };
        stepped.map_err(|e| match e {
            Error::StepSize { reason, .. } => Error::StepSize {
                time: t + dt,
                reason,
            },
            other => other,
        })?;
    }

    let trapped_in = match tracker.classified(t_end) {
        Some(k) if k < ws.blocks.len() => Trapping::Dfs(k),
        Some(_) => Trapping::Complement,
        None => Trapping::Undecided,
    };
    let hitting_time = match trapped_in {
        Trapping::Dfs(k) => tracker.first_hit[k],
        Trapping::Complement => tracker.first_hit[ws.blocks.len()],
        Trapping::Undecided => None,
    };
    let time_average = average.and_then(|(acc, count)| (count > 0).then(|| acc.unscale(count as f64)));
    let final_state = match members.as_slice() {
        [(_, v)] => QuantumState::Pure(v.clone()),
        _ => QuantumState::Density(Workspace::density(&members)),
    };
    Ok(TrajectoryRecord {
        id,
        times,
        observables,
        overlaps,
        final_state,
        trapped_in,
        hitting_time,
        time_average,
        snapshots,
        increments,
        absorption_floor: tracker.floor,
        max_purity_drift,
        t_end,
    })
}

/// `Tr ρ²` of `Σ u_m |ψ_m⟩⟨ψ_m|`.
fn ensemble_purity(members: &[(f64, crate::linalg::CVector)]) -> f64 {
    let mut p = 0.0;
    for (a, (wa, va)) in members.iter().enumerate() {
        p += wa * wa * va.norm_squared().powi(2);
        for (wb, vb) in &members[a + 1..] {
            p += 2.0 * wa * wb * va.dotc(vb).norm_sqr();
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{realize_initial_state, ChainModel, ChainParams, InitialKind, InitialStateSpec, InitialTerm};

    fn setup(gamma: f64, spec: Vec<InitialTerm>, kind: InitialKind) -> (Workspace, PureEnsemble) {
        let model = ChainModel::build(ChainParams::new(8, gamma, 3)).unwrap();
        let dfs = model.dfs().unwrap();
        let spec = InitialStateSpec { kind, terms: spec };
        let ens = realize_initial_state(&spec, &model, &dfs).unwrap();
        Workspace::for_ensemble(&model, &dfs, &ens).unwrap()
    }

    #[test]
    fn dfs_state_stays_in_dfs_and_oscillates() {
        let (ws, init) = setup(
            0.7 / std::f64::consts::PI,
            vec![InitialTerm::dfs(-1.0, Some(-6)).with_weight(1.0)],
            InitialKind::Mixture,
        );
        let cfg = IntegratorConfig::new(5.0);
        let rec = evolve_trajectory(
            &ws,
            &init,
            NoiseKind::QuantumHomodyne,
            &cfg,
            1e-3,
            &TrappingConfig::default(),
            &RecordOptions::default(),
            0,
        )
        .unwrap();
        assert!(rec.overlaps.iter().all(|o| (o[0] - 1.0).abs() < 1e-12));
        assert_eq!(rec.trapped_in, Trapping::Dfs(0));
        assert_eq!(rec.hitting_time, Some(0.0));
        // site 1 follows (1/3) cos(2t) around its mean
        let s1: Vec<f64> = rec.observables.iter().map(|o| o[0]).collect();
        let hi = s1.iter().cloned().fold(f64::MIN, f64::max);
        let lo = s1.iter().cloned().fold(f64::MAX, f64::min);
        let amp = (hi - lo) / 2.0;
        assert!((amp - 1.0 / 3.0).abs() < 0.01, "amp {amp}");
    }

    #[test]
    fn no_measurement_keeps_overlaps() {
        let (ws, init) = setup(
            0.0,
            vec![
                InitialTerm::basis("11011111").with_amplitude(0.6, 0.0),
                InitialTerm::basis("01111111").with_amplitude(0.0, 0.8),
            ],
            InitialKind::Explicit,
        );
        assert_eq!(ws.blocks.len(), 1);
        let mut cfg = IntegratorConfig::new(2.0);
        cfg.seed = 3;
        let run = |id| evolve_trajectory(
            &ws,
            &init,
            NoiseKind::QuantumHomodyne,
            &cfg,
            1e-3,
            &TrappingConfig::default(),
            &RecordOptions::default(),
            id,
        )
        .unwrap();
        let (a, b) = (run(0), run(1));
        assert!(a.overlaps.iter().all(|o| (o[0] - 1.0).abs() < 1e-12));
        assert_eq!(a.observables, b.observables);
    }

    #[test]
    fn classical_noise_preserves_purity() {
        let (ws, init) = setup(
            0.5,
            vec![
                InitialTerm::dfs(-1.0, Some(-6)).with_weight(0.3),
                InitialTerm::complement(-6).with_weight(0.7),
            ],
            InitialKind::Mixture,
        );
        let p0 = init.purity();
        let cfg = IntegratorConfig::new(3.0);
        let opts = RecordOptions {
            snapshot_times: vec![1.0, 2.0, 3.0],
            ..Default::default()
        };
        let rec = evolve_trajectory(
            &ws,
            &init,
            NoiseKind::ClassicalStratonovich,
            &cfg,
            1e-3,
            &TrappingConfig::default(),
            &opts,
            1,
        )
        .unwrap();
        assert_eq!(rec.snapshots.len(), 3);
        for (_, rho) in &rec.snapshots {
            let p = crate::linalg::trace_product(rho, rho).re;
            assert!((p - p0).abs() < 1e-8);
        }
    }

    #[test]
    fn same_stream_same_record() {
        let (ws, init) = setup(
            0.3,
            vec![
                InitialTerm::dfs(-1.0, Some(-6)).with_weight(0.4),
                InitialTerm::complement(-6).with_weight(0.6),
            ],
            InitialKind::Mixture,
        );
        let mut cfg = IntegratorConfig::new(1.0);
        cfg.seed = 11;
        let run = |id| {
            evolve_trajectory(
                &ws,
                &init,
                NoiseKind::QuantumHomodyne,
                &cfg,
                1e-3,
                &TrappingConfig::default(),
                &RecordOptions::default(),
                id,
            )
            .unwrap()
        };
        assert_eq!(run(4).overlaps, run(4).overlaps);
        assert_ne!(run(4).overlaps, run(5).overlaps);
    }

    #[test]
    fn bad_stride_rejected() {
        assert!(stride(0.05, 1e-3).is_ok());
        assert!(stride(0.05, 3e-3).is_err());
    }
}
