//! Scenario description: one TOML document per run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::SyncThresholds;
use crate::chain::{ChainParams, InitialKind, InitialStateSpec};
use crate::engine::{IntegratorConfig, NoiseKind, TrappingConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub noise_kind: NoiseKind,
    pub ensemble_size: usize,
    pub model: ChainParams,
    pub initial: InitialStateSpec,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub trapping: TrappingConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub sync: SyncThresholds,
    /// 1-based sites compared by the synchronization test; `[1, N]` when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sync_sites: Vec<usize>,
    /// Trailing fraction of the horizon used for sinusoid fits.
    #[serde(default = "half")]
    pub sync_window_fraction: f64,
    /// Trailing fraction of the horizon over which states are time-averaged;
    /// enables the ergodicity fidelity when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_fraction: Option<f64>,
    /// Integrate the Lindblad reference alongside the ensemble.
    #[serde(default = "yes")]
    pub lindblad: bool,
    /// Times at which mean trajectory states are compared with the Lindblad state.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compare_times: Vec<f64>,
    /// Fit every site at the detected frequency.
    #[serde(default)]
    pub site_pattern: bool,
    #[serde(default = "default_bins")]
    pub hitting_time_bins: usize,
}

fn half() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn default_bins() -> usize {
    20
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            sync: SyncThresholds::default(),
            sync_sites: Vec::new(),
            sync_window_fraction: half(),
            average_fraction: None,
            lindblad: true,
            compare_times: Vec::new(),
            site_pattern: false,
            hitting_time_bins: default_bins(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; relative paths resolve against the working directory.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Number of trajectories (lowest ids first) written as CSV.
    #[serde(default = "default_written")]
    pub trajectories: usize,
    /// Sample stride of the CSV files, in units of stored samples.
    #[serde(default = "one")]
    pub stride: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_written() -> usize {
    3
}
fn one() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            trajectories: default_written(),
            stride: one(),
        }
    }
}

/// Cartesian product of parameter lists; each point is a full scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Weight of the first term of a two-term mixture; the second gets `1 - w`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise_kinds: Vec<NoiseKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gammas: Vec<f64>,
}

/// One expanded sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_kind: Option<NoiseKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl SweepPoint {
    pub fn tag(&self) -> String {
        let mut parts = Vec::new();
        if let Some(k) = self.noise_kind {
            parts.push(
                match k {
                    NoiseKind::QuantumHomodyne => "quantum",
                    NoiseKind::ClassicalStratonovich => "classical",
                    NoiseKind::LindbladOnly => "lindblad",
                }
                .to_string(),
            );
        }
        if let Some(w) = self.weight {
            parts.push(format!("w{w:.3}"));
        }
        if let Some(g) = self.gamma {
            parts.push(format!("gamma{g}"));
        }
        parts.join("_")
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("scenario: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Sites compared by the synchronization test (1-based).
    pub fn sync_sites(&self) -> (usize, usize) {
        match self.analysis.sync_sites.as_slice() {
            [a, b] => (*a, *b),
            _ => (1, self.model.n),
        }
    }

    /// Checks every field; nothing is computed before this passes.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("scenario name is empty"));
        }
        if self.ensemble_size == 0 {
            return Err(Error::config("ensemble_size must be positive"));
        }
        self.model.validate()?;
        self.integrator.validate(self.model.gamma)?;
        self.trapping.validate()?;
        self.analysis.sync.validate()?;
        if let Some(scheme) = self.integrator.scheme {
            if self.noise_kind != NoiseKind::LindbladOnly && !scheme.supports(self.noise_kind) {
                return Err(Error::config(format!(
                    "scheme {scheme:?} cannot integrate {:?}",
                    self.noise_kind
                )));
            }
        }
        let a = &self.analysis;
        if !a.sync_sites.is_empty() {
            if a.sync_sites.len() != 2 {
                return Err(Error::config("sync_sites takes exactly two sites"));
            }
            if a.sync_sites.iter().any(|&s| s == 0 || s > self.model.n) {
                return Err(Error::config(format!(
                    "sync_sites {:?} outside 1..={}",
                    a.sync_sites, self.model.n
                )));
            }
        }
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(a.sync_window_fraction) {
            return Err(Error::config("sync_window_fraction must lie in (0, 1]"));
        }
        if let Some(f) = a.average_fraction {
            if !frac_ok(f) {
                return Err(Error::config("average_fraction must lie in (0, 1]"));
            }
            if f * self.integrator.t_final < self.integrator.sample_every {
                return Err(Error::config(
                    "averaging window is shorter than the sampling stride",
                ));
            }
        }
        if a.compare_times.iter().any(|&t| !(0.0..=self.integrator.t_final).contains(&t)) {
            return Err(Error::config("compare_times must lie within [0, t_final]"));
        }
        if !a.compare_times.is_empty() && self.trapping.stop_when_classified {
            return Err(Error::config(
                "compare_times needs full-length trajectories; disable stop_when_classified",
            ));
        }
        if self.outputs.stride == 0 {
            return Err(Error::config("outputs.stride must be positive"));
        }
        if let Some(s) = &self.sweep {
            if s.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
                return Err(Error::config("sweep weights must lie in [0, 1]"));
            }
            if !s.weights.is_empty()
                && (self.initial.kind != InitialKind::Mixture || self.initial.terms.len() != 2)
            {
                return Err(Error::config("a weight sweep needs a two-term mixture"));
            }
            if s.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                return Err(Error::config("sweep gammas must be >= 0"));
            }
        }
        for p in self.sweep_points() {
            self.at(&p).validate_point()?;
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        self.model.validate()?;
        self.integrator.validate(self.model.gamma)
    }

    /// Expanded sweep points; a single empty point when there is no sweep.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let Some(s) = &self.sweep else {
            return vec![SweepPoint {
                weight: None,
                noise_kind: None,
                gamma: None,
            }];
        };
        fn axis<T: Copy>(v: &[T]) -> Vec<Option<T>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().map(|x| Some(*x)).collect()
            }
        }
        let mut out = Vec::new();
        for noise_kind in axis(&s.noise_kinds) {
            for gamma in axis(&s.gammas) {
                for weight in axis(&s.weights) {
                    out.push(SweepPoint {
                        weight,
                        noise_kind,
                        gamma,
                    });
                }
            }
        }
        out
    }

    /// The scenario with one sweep point applied and the sweep removed.
    pub fn at(&self, p: &SweepPoint) -> ScenarioConfig {
        let mut c = self.clone();
        c.sweep = None;
        if let Some(k) = p.noise_kind {
            c.noise_kind = k;
            if c.integrator.scheme.is_some_and(|s| !s.supports(k)) {
                c.integrator.scheme = None;
            }
        }
        if let Some(g) = p.gamma {
            c.model.gamma = g;
        }
        if let Some(w) = p.weight {
            c.initial.terms[0].weight = Some(w);
            c.initial.terms[1].weight = Some(1.0 - w);
        }
        c
    }
}
