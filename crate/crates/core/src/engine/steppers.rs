//! Single time steps.
//!
//! `step_sse` and `step_sme` are the literal Euler–Maruyama discretizations of
//! the homodyne stochastic Schrödinger and master equations, `step_heun` the
//! Heun scheme for the Stratonovich stochastic unitary. They take dense
//! operators and are used for cross-validation.
//!
//! The production steppers exploit that the measurement operator is diagonal
//! in the computational basis:
//!
//! * [`kraus_step`] applies the Gaussian measurement Kraus operator
//!   `exp(L dY - L² dt)`, `dY = <L + L†> dt + dW`, followed by the exact
//!   propagator `exp(-iH dt)`. It agrees with the SSE to first order in `dt`,
//!   keeps states positive and leaves states inside a DFS exactly on their
//!   unitary orbit.
//! * [`strang_step`] applies `exp(-iG dW/2) exp(-iH dt) exp(-iG dW/2)`, which
//!   is exactly unitary.
//!
//! Ensemble steps act on `(weight, state)` members sharing one noise record.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, I};

/// Norm below which an un-normalized Euler step is treated as a collapse.
pub const NORM_COLLAPSE: f64 = 1e-6;
/// Most negative eigenvalue tolerated after an SME step.
pub const SME_NEGATIVITY: f64 = 1e-6;

fn step_error(reason: impl Into<String>) -> Error {
    Error::StepSize {
        time: f64::NAN,
        reason: reason.into(),
    }
}

/// Drift and diffusion of the normalized homodyne SSE.
fn sse_increment(psi: &CVector, h: &CMatrix, l: &CMatrix, dt: f64, dw: f64) -> CVector {
    let lpsi = l * psi;
    let ldag = l.adjoint();
    let x = psi.dotc(&lpsi).re * 2.0;
    let ldl_psi = &ldag * &lpsi;
    let drift = -(h * psi) * I - ldl_psi.scale(0.5) + lpsi.scale(x / 2.0) - psi.scale(x * x / 8.0);
    let diffusion = &lpsi - psi.scale(x / 2.0);
    drift.scale(dt) + diffusion.scale(dw)
}

/// One Euler–Maruyama step of the homodyne SSE, then renormalization.
pub fn step_sse(psi: &CVector, h: &CMatrix, l: &CMatrix, dt: f64, dw: f64) -> Result<CVector> {
    step_sse_raw(psi, h, l, dt, dw, true)
}

/// As [`step_sse`], optionally skipping renormalization.
pub fn step_sse_raw(
    psi: &CVector,
    h: &CMatrix,
    l: &CMatrix,
    dt: f64,
    dw: f64,
    renormalize: bool,
) -> Result<CVector> {
    let next = psi + sse_increment(psi, h, l, dt, dw);
    let norm = next.norm();
    if !norm.is_finite() || norm < NORM_COLLAPSE {
        return Err(step_error(format!("state norm collapsed to {norm:.3e}")));
    }
    Ok(if renormalize { next.unscale(norm) } else { next })
}

/// `-i[H, ρ] + LρL† - {L†L, ρ}/2`.
pub fn lindblad_generator(rho: &CMatrix, h: &CMatrix, l: &CMatrix) -> CMatrix {
    let hr = h * rho;
    let comm = &hr - hr.adjoint();
    let ldag = l.adjoint();
    let ldl = &ldag * l;
    let ldl_rho = &ldl * rho;
    -comm * I + l * rho * &ldag - (&ldl_rho + ldl_rho.adjoint()).scale(0.5)
}

/// One Euler–Maruyama step of the homodyne SME with trace restoration and
/// symmetrization.
pub fn step_sme(rho: &CMatrix, h: &CMatrix, l: &CMatrix, dt: f64, dw: f64) -> Result<CMatrix> {
    let ldag = l.adjoint();
    let x = linalg::trace_product(&(l + &ldag), rho).re;
    let innovation = l * rho + rho * &ldag - rho.scale(x);
    let next = rho + lindblad_generator(rho, h, l).scale(dt) + innovation.scale(dw);
    let mut next = (&next + next.adjoint()).scale(0.5);
    let tr = next.trace().re;
    if !tr.is_finite() || tr <= 0.0 {
        return Err(step_error(format!("trace became {tr:.3e}")));
    }
    next.unscale_mut(tr);
    let low = linalg::eigh_unchecked(&next).values[0];
    if low < -SME_NEGATIVITY {
        return Err(step_error(format!("density matrix eigenvalue {low:.3e}")));
    }
    Ok(next)
}

/// One Heun step of `dψ = -i(H dt + G ∘ dW) ψ`.
pub fn step_heun(
    psi: &CVector,
    h: &CMatrix,
    g: &CMatrix,
    dt: f64,
    dw: f64,
    renormalize: bool,
) -> Result<CVector> {
    let rhs = |v: &CVector| -> CVector { -((h * v).scale(dt) + (g * v).scale(dw)) * I };
    let k1 = rhs(psi);
    let predictor = psi + &k1;
    let k2 = rhs(&predictor);
    let next = psi + (k1 + k2).scale(0.5);
    let norm = next.norm();
    if !norm.is_finite() || norm < NORM_COLLAPSE {
        return Err(step_error(format!("state norm collapsed to {norm:.3e}")));
    }
    Ok(if renormalize { next.unscale(norm) } else { next })
}

/// Most distinct values a [`DiagonalLevels`] may hold.
pub const MAX_LEVELS: usize = 8;

/// `out = m v` for square column-major `m`.
#[inline]
pub fn matvec_into(m: &CMatrix, v: &CVector, out: &mut CVector) {
    let d = v.len();
    let data = m.as_slice();
    let out = out.as_mut_slice();
    out.iter_mut().for_each(|z| *z = C64::from(0.0));
    for (j, x) in v.iter().enumerate() {
        let col = &data[j * d..(j + 1) * d];
        for (o, a) in out.iter_mut().zip(col) {
            *o += a * x;
        }
    }
}

/// A real diagonal operator stored as its distinct values and, per basis
/// state, the index of its value. Factors are evaluated once per level.
#[derive(Debug, Clone)]
pub struct DiagonalLevels {
    pub levels: Vec<f64>,
    pub index: Vec<usize>,
}

impl DiagonalLevels {
    /// Panics when `diag` has more than [`MAX_LEVELS`] distinct values.
    pub fn new(diag: &[f64]) -> Self {
        let mut levels: Vec<f64> = Vec::new();
        let index = diag
            .iter()
            .map(|&x| match levels.iter().position(|&l| l == x) {
                Some(k) => k,
                None => {
                    levels.push(x);
                    levels.len() - 1
                }
            })
            .collect();
        assert!(levels.len() <= MAX_LEVELS, "diagonal operator has too many levels");
        DiagonalLevels { levels, index }
    }

    pub fn value(&self, k: usize) -> f64 {
        self.levels[self.index[k]]
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// `<L + L†>` of a weighted ensemble for diagonal `L`.
pub fn ensemble_measurement_mean(members: &[(f64, CVector)], l_diag: &[f64]) -> f64 {
    let mut x = 0.0;
    for (w, psi) in members {
        let mut s = 0.0;
        for (z, l) in psi.iter().zip(l_diag) {
            s += z.norm_sqr() * l;
        }
        x += w * s;
    }
    2.0 * x
}

/// Gaussian measurement update followed by `u = exp(-iH dt)`.
///
/// Member weights follow Bayes' rule `u_m ∝ u_m ‖M ψ_m‖²`; returns the
/// measurement record increment `dY`.
pub fn kraus_step(
    members: &mut [(f64, CVector)],
    u: &CMatrix,
    l_diag: &[f64],
    dt: f64,
    dw: f64,
) -> Result<f64> {
    let mut scratch = CVector::zeros(u.nrows());
    kraus_step_with(members, u, &DiagonalLevels::new(l_diag), dt, dw, &mut scratch)
}

/// [`kraus_step`] reusing `scratch` (length `dim`) to avoid allocation.
pub fn kraus_step_with(
    members: &mut [(f64, CVector)],
    u: &CMatrix,
    l: &DiagonalLevels,
    dt: f64,
    dw: f64,
    scratch: &mut CVector,
) -> Result<f64> {
    let mut x = 0.0;
    for (w, psi) in members.iter() {
        let mut s = 0.0;
        for (k, z) in psi.iter().enumerate() {
            s += z.norm_sqr() * l.value(k);
        }
        x += w * s;
    }
    let dy = 2.0 * x * dt + dw;
    let mut factors = [0.0; MAX_LEVELS];
    let factors = &mut factors[..l.levels.len()];
    for (f, v) in factors.iter_mut().zip(&l.levels) {
        *f = v * dy - v * v * dt;
    }
    // shift by the largest exponent; the common factor cancels on normalization
    let top = factors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    factors.iter_mut().for_each(|f| *f = (*f - top).exp());
    let mut total = 0.0;
    for (w, psi) in members.iter_mut() {
        for (z, &i) in psi.iter_mut().zip(&l.index) {
            *z *= factors[i];
        }
        let n2 = psi.norm_squared();
        if !n2.is_finite() || n2 <= 0.0 {
            return Err(step_error("measurement update annihilated a member"));
        }
        matvec_into(u, psi, scratch);
        std::mem::swap(psi, scratch);
        psi.unscale_mut(n2.sqrt());
        *w *= n2;
        total += *w;
    }
    if !total.is_finite() || total <= 0.0 {
        return Err(step_error("ensemble weights vanished"));
    }
    members.iter_mut().for_each(|(w, _)| *w /= total);
    Ok(dy)
}

/// `exp(-iG dW/2) u exp(-iG dW/2)` for diagonal `G`, applied to every member.
pub fn strang_step(members: &mut [(f64, CVector)], u: &CMatrix, g_diag: &[f64], dw: f64) {
    let mut scratch = CVector::zeros(u.nrows());
    strang_step_with(members, u, &DiagonalLevels::new(g_diag), dw, &mut scratch);
}

/// [`strang_step`] reusing `scratch` (length `dim`).
pub fn strang_step_with(
    members: &mut [(f64, CVector)],
    u: &CMatrix,
    g: &DiagonalLevels,
    dw: f64,
    scratch: &mut CVector,
) {
    let mut half = [C64::from(0.0); MAX_LEVELS];
    for (h, v) in half.iter_mut().zip(&g.levels) {
        *h = C64::from_polar(1.0, -v * dw / 2.0);
    }
    for (_, psi) in members.iter_mut() {
        for (z, &i) in psi.iter_mut().zip(&g.index) {
            *z *= half[i];
        }
        matvec_into(u, psi, scratch);
        std::mem::swap(psi, scratch);
        for (z, &i) in psi.iter_mut().zip(&g.index) {
            *z *= half[i];
        }
    }
}

/// `exp(-iH dt)` from the spectral decomposition of `H`.
pub fn unitary_propagator(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    let eig = linalg::eigh(h)?;
    Ok(eig.map(|e| C64::from_polar(1.0, -e * dt)))
}
