//! XY spin chain in a transverse field, monitored through `σ^z` on one site.
//!
//! Basis convention: site 1 is the most significant bit of the basis index and
//! bit value 0 means spin up (`σ^z = +1`). Energies are in units of `J`.

use serde::{Deserialize, Serialize};

use crate::dfs::{DfsDecomposition, DfsSubspace};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::state::PureEnsemble;

pub const MAX_SITES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    pub n: usize,
    #[serde(default = "unit")]
    pub j: f64,
    #[serde(default = "unit")]
    pub h: f64,
    /// Reduced measurement strength `Γ/J`.
    pub gamma: f64,
    /// Monitored site, 1-based.
    pub measured_site: usize,
}

fn unit() -> f64 {
    1.0
}

impl ChainParams {
    pub fn new(n: usize, gamma: f64, measured_site: usize) -> Self {
        ChainParams {
            n,
            j: 1.0,
            h: 1.0,
            gamma,
            measured_site,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_SITES).contains(&self.n) {
            return Err(Error::config(format!(
                "n = {} outside 2..={MAX_SITES}",
                self.n
            )));
        }
        self.validate_fields()
    }

    fn validate_fields(&self) -> Result<()> {
        if !(self.j.is_finite() && self.j > 0.0) {
            return Err(Error::config(format!("j = {} must be positive", self.j)));
        }
        if !self.h.is_finite() {
            return Err(Error::config("h must be finite"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::config(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if self.measured_site < 1 || self.measured_site > self.n {
            return Err(Error::config(format!(
                "measured_site = {} outside 1..={}",
                self.measured_site, self.n
            )));
        }
        Ok(())
    }

    /// Measurement rate `Γ = gamma·J`.
    pub fn rate(&self) -> f64 {
        self.gamma * self.j
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }
}

/// `H = (J/2) Σ (σ^x_j σ^x_{j+1} + σ^y_j σ^y_{j+1}) + h Σ σ^z_j`.
///
/// Accepts a single site (pure field term) in addition to valid chains.
pub fn build_hamiltonian(params: &ChainParams) -> Result<CMatrix> {
    if !(1..=MAX_SITES).contains(&params.n) {
        return Err(Error::config(format!(
            "n = {} outside 1..={MAX_SITES}",
            params.n
        )));
    }
    params.validate_fields()?;
    let n = params.n;
    let dim = params.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for b in 0..dim {
        h[(b, b)] = C64::from(params.h * magnetization_of(b, n));
        // XX + YY = 2(σ+σ- + σ-σ+) flips an anti-aligned neighbour pair
        for site in 0..n.saturating_sub(1) {
            let mask = (1 << (n - 1 - site)) | (1 << (n - 2 - site));
            let pair = b & mask;
            if pair != 0 && pair != mask {
                h[(b ^ mask, b)] += C64::from(params.j);
            }
        }
    }
    Ok(h)
}

/// `L = √(gamma·J) σ^z_u`.
pub fn build_measurement(params: &ChainParams) -> Result<CMatrix> {
    params.validate_fields()?;
    let diag = measurement_diagonal(params);
    Ok(CMatrix::from_diagonal(&CVector::from_iterator(
        diag.len(),
        diag.into_iter().map(C64::from),
    )))
}

/// Noise Hamiltonian `G` of the stochastic unitary `H + ξ(t) G`; same matrix as `L`.
pub fn build_classical_noise_generator(params: &ChainParams) -> Result<CMatrix> {
    build_measurement(params)
}

pub fn measurement_diagonal(params: &ChainParams) -> Vec<f64> {
    let s = params.rate().sqrt();
    linalg::sigma_z_diagonal(params.measured_site - 1, params.n)
        .into_iter()
        .map(|x| s * x)
        .collect()
}

/// `Σ_j σ^z_j` on basis state `b` of an `n`-site chain.
pub fn magnetization_of(b: usize, n: usize) -> f64 {
    n as f64 - 2.0 * (b.count_ones() as f64)
}

pub fn magnetization_diagonal(n: usize) -> Vec<f64> {
    (0..1usize << n).map(|b| magnetization_of(b, n)).collect()
}

/// Operators of one chain, shared read-only by all trajectories.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub params: ChainParams,
    pub hamiltonian: CMatrix,
    pub measurement: CMatrix,
    pub magnetization: Vec<f64>,
    /// Diagonal of `σ^z_j` for each site.
    pub sz: Vec<Vec<f64>>,
}

impl ChainModel {
    pub fn build(params: ChainParams) -> Result<Self> {
        params.validate()?;
        let n = params.n;
        Ok(ChainModel {
            params,
            hamiltonian: build_hamiltonian(&params)?,
            measurement: build_measurement(&params)?,
            magnetization: magnetization_diagonal(n),
            sz: (0..n).map(|s| linalg::sigma_z_diagonal(s, n)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// DFS decomposition resolved by total magnetization.
    pub fn dfs(&self) -> Result<DfsDecomposition> {
        crate::dfs::find_dfs_resolved(
            &self.hamiltonian,
            &self.measurement,
            &self.magnetization,
            crate::dfs::DEFAULT_TOL,
        )
    }

    /// `c/√Γ`, or `c` itself when `Γ = 0`.
    pub fn normalized_c(&self, c: f64) -> f64 {
        let s = self.params.rate().sqrt();
        if s > 0.0 {
            c / s
        } else {
            c
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// Classical mixture of pure terms with probabilities `weight`.
    Mixture,
    /// Coherent superposition of terms with complex `amplitude`.
    Superposition,
    /// Superposition of computational basis states.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Dfs,
    Complement,
    Basis,
}

/// One term of an initial state.
///
/// `block = "dfs"` picks a state in the subspace with `L` eigenvalue
/// `c·√Γ` (optionally in magnetization sector `magnetization`): the equal
/// superposition of the lowest-energy level pair whose gap is `mode`, the
/// upper level carrying the extra phase `phase`. A one-dimensional subspace
/// gives its only vector and a single-frequency subspace needs no `mode`.
///
/// `block = "complement"` picks, among basis states of the sector, the one
/// with the largest weight outside every DFS and projects it onto the
/// complement.
///
/// `block = "basis"` is the computational basis state written as a bit string
/// over sites `1..=N` (`0` = up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialTerm {
    pub block: BlockKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetization: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<[f64; 2]>,
}

impl InitialTerm {
    pub fn dfs(c: f64, magnetization: Option<i32>) -> Self {
        InitialTerm {
            block: BlockKind::Dfs,
            c: Some(c),
            magnetization,
            mode: None,
            phase: None,
            basis: None,
            weight: None,
            amplitude: None,
        }
    }

    pub fn complement(magnetization: i32) -> Self {
        InitialTerm {
            block: BlockKind::Complement,
            magnetization: Some(magnetization),
            ..InitialTerm::dfs(0.0, None)
        }
        .without_c()
    }

    pub fn basis(bits: &str) -> Self {
        InitialTerm {
            block: BlockKind::Basis,
            basis: Some(bits.to_string()),
            ..InitialTerm::dfs(0.0, None)
        }
        .without_c()
    }

    fn without_c(mut self) -> Self {
        self.c = None;
        self
    }

    pub fn with_mode(mut self, mode: f64) -> Self {
        self.mode = Some(mode);
        self
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = Some(phase);
        self
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.weight = Some(w);
        self
    }

    pub fn with_amplitude(mut self, re: f64, im: f64) -> Self {
        self.amplitude = Some([re, im]);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSpec {
    pub kind: InitialKind,
    pub terms: Vec<InitialTerm>,
}

const SPEC_TOL: f64 = 1e-9;

/// Builds the initial ensemble; a superposition yields a single member.
pub fn realize_initial_state(
    spec: &InitialStateSpec,
    model: &ChainModel,
    dfs: &DfsDecomposition,
) -> Result<PureEnsemble> {
    if spec.terms.is_empty() {
        return Err(Error::config("initial state has no terms"));
    }
    let default_sector = spec
        .terms
        .iter()
        .find(|t| t.block == BlockKind::Dfs)
        .and_then(|t| t.magnetization);
    match spec.kind {
        InitialKind::Mixture => {
            let mut members = Vec::with_capacity(spec.terms.len());
            let mut total = 0.0;
            for (k, t) in spec.terms.iter().enumerate() {
                if t.amplitude.is_some() {
                    return Err(Error::config(format!(
                        "mixture term {k} takes a weight, not an amplitude"
                    )));
                }
                let w = t
                    .weight
                    .ok_or_else(|| Error::config(format!("mixture term {k} needs a weight")))?;
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::config(format!("mixture term {k}: weight {w} < 0")));
                }
                total += w;
                members.push((w, resolve_term(t, model, dfs, default_sector)?));
            }
            if (total - 1.0).abs() > SPEC_TOL {
                return Err(Error::config(format!("mixture weights sum to {total}")));
            }
            // absorb the round-off left by the tolerance above
            members.iter_mut().for_each(|(w, _)| *w /= total);
            members.retain(|(w, _)| *w > 0.0);
            PureEnsemble::new(members)
        }
        InitialKind::Superposition | InitialKind::Explicit => {
            let mut psi = CVector::zeros(model.dim());
            let mut norm2 = 0.0;
            for (k, t) in spec.terms.iter().enumerate() {
                if spec.kind == InitialKind::Explicit && t.block != BlockKind::Basis {
                    return Err(Error::config(format!(
                        "explicit term {k} must use block = \"basis\""
                    )));
                }
                if t.weight.is_some() {
                    return Err(Error::config(format!(
                        "superposition term {k} takes an amplitude, not a weight"
                    )));
                }
                let [re, im] = t.amplitude.ok_or_else(|| {
                    Error::config(format!("superposition term {k} needs an amplitude"))
                })?;
                let a = C64::new(re, im);
                norm2 += a.norm_sqr();
                psi += resolve_term(t, model, dfs, default_sector)?.scale(1.0) * a;
            }
            if (norm2 - 1.0).abs() > SPEC_TOL {
                return Err(Error::config(format!(
                    "superposition amplitudes have squared norm {norm2}"
                )));
            }
            let norm = psi.norm();
            if (norm - 1.0).abs() > 1e-8 {
                return Err(Error::config(format!(
                    "superposition terms are not orthogonal (state norm {norm})"
                )));
            }
            Ok(PureEnsemble::pure(psi.unscale(norm)))
        }
    }
}

fn resolve_term(
    t: &InitialTerm,
    model: &ChainModel,
    dfs: &DfsDecomposition,
    default_sector: Option<i32>,
) -> Result<CVector> {
    match t.block {
        BlockKind::Dfs => {
            let sub = select_subspace(t, model, dfs)?;
            dfs_state(sub, t.mode, t.phase.unwrap_or(0.0))
        }
        BlockKind::Complement => {
            let m = t.magnetization.or(default_sector).ok_or_else(|| {
                Error::config("complement term needs a magnetization sector")
            })?;
            complement_state(model, dfs, m as f64)
        }
        BlockKind::Basis => {
            let bits = t
                .basis
                .as_deref()
                .ok_or_else(|| Error::config("basis term needs a bit string"))?;
            basis_state(bits, model.params.n)
        }
    }
}

fn describe(model: &ChainModel, s: &DfsSubspace) -> String {
    format!(
        "c={:+.6} magnetization={} dim={} modes={:?}",
        model.normalized_c(s.c),
        s.charge.map_or("-".into(), |q| format!("{q}")),
        s.dim(),
        s.bohr_frequencies
    )
}

fn available(model: &ChainModel, dfs: &DfsDecomposition) -> String {
    dfs.subspaces
        .iter()
        .map(|s| describe(model, s))
        .collect::<Vec<_>>()
        .join("; ")
}

fn select_subspace<'a>(
    t: &InitialTerm,
    model: &ChainModel,
    dfs: &'a DfsDecomposition,
) -> Result<&'a DfsSubspace> {
    let c = t
        .c
        .ok_or_else(|| Error::config("dfs term needs the measurement constant c"))?;
    let mut candidates: Vec<&DfsSubspace> = dfs
        .subspaces
        .iter()
        .filter(|s| (model.normalized_c(s.c) - c).abs() < 1e-6)
        .filter(|s| match (t.magnetization, s.charge) {
            (Some(m), Some(q)) => (m as f64 - q).abs() < 0.5,
            (Some(_), None) => false,
            (None, _) => true,
        })
        .collect();
    if let Some(mode) = t.mode {
        candidates.retain(|s| s.bohr_frequencies.iter().any(|f| mode_matches(*f, mode)));
    }
    match candidates.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::config(format!(
            "no DFS matches c={c} magnetization={:?} mode={:?}; available: {}",
            t.magnetization,
            t.mode,
            available(model, dfs)
        ))),
        many => Err(Error::config(format!(
            "DFS selector c={c} is ambiguous; candidates: {}",
            many.iter()
                .map(|s| describe(model, s))
                .collect::<Vec<_>>()
                .join("; ")
        ))),
    }
}

fn mode_matches(f: f64, mode: f64) -> bool {
    (f - mode).abs() <= 1e-6 * mode.abs().max(1.0)
}

/// State of a DFS carrying the requested Bohr frequency.
pub fn dfs_state(sub: &DfsSubspace, mode: Option<f64>, phase: f64) -> Result<CVector> {
    let mode = match mode {
        Some(m) => m,
        None if sub.dim() == 1 => return Ok(sub.vector(0)),
        None if sub.bohr_frequencies.len() == 1 => sub.bohr_frequencies[0],
        None => {
            return Err(Error::config(format!(
                "DFS of dim {} supports modes {:?}; select one with `mode`",
                sub.dim(),
                sub.bohr_frequencies
            )))
        }
    };
    let e = &sub.energies;
    let pair = (0..e.len())
        .flat_map(|i| (i + 1..e.len()).map(move |j| (i, j)))
        .find(|&(i, j)| mode_matches(e[j] - e[i], mode))
        .ok_or_else(|| {
            Error::config(format!(
                "mode {mode} absent; available modes: {:?}",
                sub.bohr_frequencies
            ))
        })?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let upper = sub.vector(pair.1) * C64::from_polar(s, phase);
    Ok(sub.vector(pair.0).scale(s) + upper)
}

/// Basis state of the sector with the largest complement weight, projected
/// onto the complement. Ties go to the lowest basis index.
pub fn complement_state(model: &ChainModel, dfs: &DfsDecomposition, sector: f64) -> Result<CVector> {
    let idx: Vec<usize> = (0..model.dim())
        .filter(|&b| (model.magnetization[b] - sector).abs() < 0.5)
        .collect();
    if idx.is_empty() {
        return Err(Error::config(format!("no basis state has magnetization {sector}")));
    }
    let blocks: Vec<&DfsSubspace> = dfs
        .subspaces
        .iter()
        .filter(|s| s.charge.is_none_or(|q| (q - sector).abs() < 0.5))
        .collect();
    let project = |b: usize| {
        let mut v = CVector::zeros(model.dim());
        v[b] = C64::from(1.0);
        for s in &blocks {
            let coeff = s.basis.row(b).adjoint();
            v -= &s.basis * coeff;
        }
        v
    };
    let mut best: Option<(f64, CVector)> = None;
    for &b in &idx {
        let v = project(b);
        let w = v.norm_squared();
        if best.as_ref().is_none_or(|(bw, _)| w > bw + 1e-12) {
            best = Some((w, v));
        }
    }
    let (w, v) = best.expect("sector is non-empty");
    if w < 1e-12 {
        return Err(Error::config(format!(
            "sector {sector} has no complement"
        )));
    }
    Ok(v.unscale(w.sqrt()))
}

/// Computational basis state from a bit string over sites `1..=n`.
pub fn basis_state(bits: &str, n: usize) -> Result<CVector> {
    if bits.len() != n {
        return Err(Error::config(format!(
            "basis string {bits:?} has {} sites, chain has {n}",
            bits.len()
        )));
    }
    let mut index = 0usize;
    for ch in bits.chars() {
        index = (index << 1)
            | match ch {
                '0' => 0,
                '1' => 1,
                _ => return Err(Error::config(format!("invalid basis character {ch:?}"))),
            };
    }
    let mut v = CVector::zeros(1 << n);
    v[index] = C64::from(1.0);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfs;
    use crate::linalg::{identity, kron_chain, pauli_x, pauli_y, pauli_z};
    use crate::state::QuantumState;

    /// Hamiltonian from explicit Kronecker products.
    fn naive_hamiltonian(p: &ChainParams) -> CMatrix {
        let n = p.n;
        let op = |site: usize, m: &CMatrix| {
            let f: Vec<CMatrix> = (0..n)
                .map(|k| if k == site { m.clone() } else { identity(2) })
                .collect();
            kron_chain(&f).unwrap()
        };
        let dim = 1 << n;
        let mut h = CMatrix::zeros(dim, dim);
        for j in 0..n - 1 {
            for s in [pauli_x(), pauli_y()] {
                h += (op(j, &s) * op(j + 1, &s)).scale(p.j / 2.0);
            }
        }
        for j in 0..n {
            h += op(j, &pauli_z()).scale(p.h);
        }
        h
    }

    #[test]
    fn matches_naive_construction() {
        for n in 1..=6 {
            for (j, h) in [(1.0, 1.0), (0.7, -0.3)] {
                let p = ChainParams {
                    n,
                    j,
                    h,
                    gamma: 0.5,
                    measured_site: 1,
                };
                let fast = build_hamiltonian(&p).unwrap();
                let slow = naive_hamiltonian(&p);
                assert!(linalg::max_abs(&(fast - slow)) < 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn single_site_is_field_only() {
        let p = ChainParams {
            n: 1,
            j: 1.0,
            h: 0.4,
            gamma: 0.0,
            measured_site: 1,
        };
        let h = build_hamiltonian(&p).unwrap();
        assert!(linalg::max_abs(&(h - pauli_z().scale(0.4))) < 1e-15);
        assert!(p.validate().is_err());
    }

    #[test]
    fn two_site_spectrum_without_field() {
        let mut p = ChainParams::new(2, 1.0, 1);
        p.h = 0.0;
        let eig = linalg::eigh(&build_hamiltonian(&p).unwrap()).unwrap();
        let expect = [-1.0, 0.0, 0.0, 1.0];
        for (a, b) in eig.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_symmetric_without_field() {
        for n in 2..=6 {
            let mut p = ChainParams::new(n, 1.0, 1);
            p.h = 0.0;
            let v = linalg::eigh(&build_hamiltonian(&p).unwrap()).unwrap().values;
            let m = v.len();
            for k in 0..m {
                assert!((v[k] + v[m - 1 - k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn conserves_magnetization() {
        let model = ChainModel::build(ChainParams::new(8, 0.7 / std::f64::consts::PI, 3)).unwrap();
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            model.dim(),
            model.magnetization.iter().map(|&x| C64::from(x)),
        ));
        assert_eq!(linalg::max_abs(&linalg::commutator(&model.hamiltonian, &m)), 0.0);
    }

    #[test]
    fn measurement_operator() {
        let p = ChainParams::new(2, 1.0, 1);
        let l = build_measurement(&p).unwrap();
        let d: Vec<f64> = l.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![1.0, 1.0, -1.0, -1.0]);
        let zero = build_measurement(&ChainParams::new(3, 0.0, 2)).unwrap();
        assert_eq!(linalg::max_abs(&zero), 0.0);
        let p = ChainParams::new(4, 2.5, 3);
        let l = build_measurement(&p).unwrap();
        assert!(linalg::max_abs(&(&l * &l - identity(16).scale(2.5))) < 1e-12);
    }

    #[test]
    fn noise_generator_does_not_commute_in_bulk() {
        let p = ChainParams::new(3, 1.0, 2);
        let g = build_classical_noise_generator(&p).unwrap();
        assert_eq!(g, build_measurement(&p).unwrap());
        let h = build_hamiltonian(&p).unwrap();
        assert!(linalg::max_abs(&linalg::commutator(&g, &h)) > 0.1);
    }

    #[test]
    fn params_validation() {
        assert!(ChainParams::new(11, 1.0, 1).validate().is_err());
        assert!(ChainParams::new(4, -1.0, 1).validate().is_err());
        assert!(ChainParams::new(4, 1.0, 0).validate().is_err());
        assert!(ChainParams::new(4, 1.0, 5).validate().is_err());
        assert!(ChainParams::new(4, 0.0, 4).validate().is_ok());
    }

    fn fig1_model() -> (ChainModel, DfsDecomposition) {
        let model = ChainModel::build(ChainParams::new(8, 0.7 / std::f64::consts::PI, 3)).unwrap();
        let dfs = model.dfs().unwrap();
        (model, dfs)
    }

    #[test]
    fn mixture_overlaps() {
        let (model, dfs) = fig1_model();
        let spec = InitialStateSpec {
            kind: InitialKind::Mixture,
            terms: vec![
                InitialTerm::dfs(-1.0, Some(-6)).with_weight(0.4),
                InitialTerm::complement(-6).with_weight(0.6),
            ],
        };
        let ens = realize_initial_state(&spec, &model, &dfs).unwrap();
        let ov = dfs::overlaps(&ens.to_state(), &dfs).unwrap();
        let q1 = dfs
            .subspaces
            .iter()
            .position(|s| s.c < 0.0 && s.charge == Some(-6.0))
            .unwrap();
        assert!((ov[q1] - 0.4).abs() < 1e-10);
        assert!((ov.last().unwrap() - 0.6).abs() < 1e-10);
        assert!((ov.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        // the complement state is the single down spin sitting on the measured site
        let p = &ens.members[1].1;
        let b = 255 - (1 << 5);
        assert!((p[b].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn superposition_is_pure_and_split() {
        let (model, dfs) = fig1_model();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let spec = InitialStateSpec {
            kind: InitialKind::Superposition,
            terms: vec![
                InitialTerm::dfs(-1.0, Some(-6)).with_amplitude(s, 0.0),
                InitialTerm::dfs(1.0, Some(6)).with_amplitude(s, 0.0),
            ],
        };
        let ens = realize_initial_state(&spec, &model, &dfs).unwrap();
        assert_eq!(ens.members.len(), 1);
        let state = ens.to_state();
        assert!((state.purity() - 1.0).abs() < 1e-12);
        let ov = dfs::overlaps(&state, &dfs).unwrap();
        let heavy: Vec<f64> = ov.iter().copied().filter(|x| *x > 1e-12).collect();
        assert_eq!(heavy.len(), 2);
        assert!(heavy.iter().all(|x| (x - 0.5).abs() < 1e-10));
    }

    #[test]
    fn single_block_has_full_overlap() {
        let (model, dfs) = fig1_model();
        let spec = InitialStateSpec {
            kind: InitialKind::Mixture,
            terms: vec![InitialTerm::dfs(1.0, Some(6)).with_weight(1.0)],
        };
        let ens = realize_initial_state(&spec, &model, &dfs).unwrap();
        let ov = dfs::overlaps(&QuantumState::Pure(ens.members[0].1.clone()), &dfs).unwrap();
        assert!((ov.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-10);
        assert!(ov.last().unwrap().abs() < 1e-10);
    }

    #[test]
    fn unresolvable_mode_lists_available() {
        let (model, dfs) = fig1_model();
        let spec = InitialStateSpec {
            kind: InitialKind::Mixture,
            terms: vec![InitialTerm::dfs(-1.0, Some(-6)).with_mode(3.0).with_weight(1.0)],
        };
        let err = realize_initial_state(&spec, &model, &dfs).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("available"));
    }

    #[test]
    fn malformed_specs_rejected() {
        let (model, dfs) = fig1_model();
        let bad_sum = InitialStateSpec {
            kind: InitialKind::Mixture,
            terms: vec![
                InitialTerm::dfs(-1.0, Some(-6)).with_weight(0.5),
                InitialTerm::complement(-6).with_weight(0.6),
            ],
        };
        assert!(realize_initial_state(&bad_sum, &model, &dfs).is_err());
        let ambiguous = InitialStateSpec {
            kind: InitialKind::Mixture,
            terms: vec![InitialTerm::dfs(-1.0, None).with_weight(1.0)],
        };
        assert!(realize_initial_state(&ambiguous, &model, &dfs).is_err());
        let bits = InitialStateSpec {
            kind: InitialKind::Explicit,
            terms: vec![InitialTerm::basis("0101").with_amplitude(1.0, 0.0)],
        };
        assert!(realize_initial_state(&bits, &model, &dfs).is_err());
    }

    #[test]
    fn explicit_basis_state() {
        let v = basis_state("10", 2).unwrap();
        assert_eq!(v[2], C64::from(1.0));
        assert!(basis_state("1x", 2).is_err());
    }
}
