//! Mean fidelity between time-averaged trajectory states and the ensemble
//! state, with its inverse-participation-ratio prediction and bounds.

use serde::{Deserialize, Serialize};

use super::stats::mean_estimate;
use crate::engine::Workspace;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, I};

/// Largest complement block (in working-space dimensions) the kernel
/// preflight will handle; the superoperator is `d² × d²`.
pub const MAX_PREFLIGHT_DIM: usize = 64;

/// Eigenvalues of `𝓛†𝓛` below this count as kernel.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub weights: Vec<f64>,
    pub empirical_mean: f64,
    pub standard_error: f64,
    pub empirical_variance: f64,
    /// `Σ w_k²`.
    pub predicted: f64,
    /// `Σ w_k³ - (Σ w_k²)²`.
    pub predicted_variance: f64,
    /// `(1/N - 1)² / 4` with `N` the number of blocks.
    pub popoviciu_bound: f64,
    pub per_trajectory: Vec<f64>,
}

/// Inverse participation ratio `Σ w²`.
pub fn predicted_fidelity(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum()
}

/// Variance of the per-trajectory fidelity when every trajectory localizes in
/// block `k` with probability `w_k` and then scores `w_k`.
pub fn predicted_variance(w: &[f64]) -> f64 {
    let s2 = predicted_fidelity(w);
    (w.iter().map(|x| x.powi(3)).sum::<f64>() - s2 * s2).max(0.0)
}

pub fn popoviciu_bound(n_blocks: usize) -> f64 {
    let n = n_blocks.max(1) as f64;
    (1.0 / n - 1.0).powi(2) / 4.0
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x >= -1e-12)) {
        return Err(Error::contract("block weights must be non-negative"));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-8 {
        return Err(Error::contract(format!("block weights sum to {s}")));
    }
    Ok(())
}

/// Compares each trajectory's time-averaged state with `steady`.
pub fn ergodicity_fidelity(
    time_averages: &[Option<CMatrix>],
    steady: &CMatrix,
    weights: &[f64],
) -> Result<ErgodicityReport> {
    check_weights(weights)?;
    if time_averages.is_empty() {
        return Err(Error::InsufficientData("no trajectories".into()));
    }
    let mut per_trajectory = Vec::with_capacity(time_averages.len());
    for (k, avg) in time_averages.iter().enumerate() {
        let avg = avg.as_ref().ok_or_else(|| {
            Error::config(format!(
                "trajectory {k} stored no time-averaged state; set an averaging fraction \
                 and a sampling stride shorter than the averaging window"
            ))
        })?;
        let tr = avg.trace().re;
        per_trajectory.push(linalg::fidelity(&avg.unscale(tr), steady)?);
    }
    let est = mean_estimate(&per_trajectory).expect("non-empty");
    let predicted = predicted_fidelity(weights);
    let n = weights.len() as f64;
    if predicted < 1.0 / n - 1e-12 {
        return Err(Error::contract(format!(
            "inverse participation ratio {predicted} below 1/{n}"
        )));
    }
    Ok(ErgodicityReport {
        weights: weights.to_vec(),
        empirical_mean: est.mean,
        standard_error: est.standard_error,
        empirical_variance: est.variance,
        predicted,
        predicted_variance: predicted_variance(weights),
        popoviciu_bound: popoviciu_bound(weights.len()),
        per_trajectory,
    })
}

/// Column-stacked Lindblad superoperator of `(h, l)`.
pub fn liouvillian(h: &CMatrix, l: &CMatrix) -> CMatrix {
    let d = h.nrows();
    let id = CMatrix::identity(d, d);
    let l2 = l.adjoint() * l;
    let lconj = l.map(|z| z.conj());
    let mut sup = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
    sup += lconj.kronecker(l);
    sup -= (id.kronecker(&l2) + l2.transpose().kronecker(&id)) * C64::from(0.5);
    sup
}

/// Dimension of the Lindblad kernel restricted to the span of `basis`.
pub fn restricted_kernel_dimension(h: &CMatrix, l: &CMatrix, basis: &CMatrix) -> Result<usize> {
    let d = basis.ncols();
    if d == 0 {
        return Ok(0);
    }
    if d > MAX_PREFLIGHT_DIM {
        return Err(Error::UnsupportedMode(format!(
            "kernel preflight on a {d}-dimensional block exceeds {MAX_PREFLIGHT_DIM}"
        )));
    }
    let hb = basis.adjoint() * h * basis;
    let lb = basis.adjoint() * l * basis;
    let sup = liouvillian(&hb, &lb);
    let gram = sup.adjoint() * &sup;
    let scale = linalg::max_abs(&gram).max(1.0);
    let eig = linalg::eigh_unchecked(&gram);
    Ok(eig.values.iter().filter(|v| **v < KERNEL_TOL * scale).count())
}

/// Verifies that the workspace complement carries a unique steady state.
pub fn complement_preflight(ws: &Workspace) -> Result<()> {
    let basis = ws.complement_basis();
    if basis.ncols() == 0 {
        return Ok(());
    }
    let k = restricted_kernel_dimension(&ws.hamiltonian, &ws.measurement, &basis)?;
    if k != 1 {
        return Err(Error::UnsupportedMode(format!(
            "the complement block has a {k}-dimensional Lindblad kernel; the fidelity \
             prediction needs a unique steady state per block"
        )));
    }
    Ok(())
}
