//! Dense complex linear algebra on `2^N`-dimensional Hilbert spaces.
//!
//! Matrices are plain `nalgebra` dense matrices. The Hermitian eigensolver is
//! nalgebra's `SymmetricEigen` with the spectrum sorted ascending.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical tolerances used by the state and matrix checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Max |M - M†| entry for a matrix to count as Hermitian (relative to
    /// max(1, |M|_max)).
    pub hermitian: f64,
    pub unitary: f64,
    /// Norm / trace deviation accepted for a normalized state.
    pub normalization: f64,
    /// Most negative eigenvalue accepted in a density matrix.
    pub min_eigenvalue: f64,
    /// Eigenvalues in (-fidelity_clamp, 0) are clamped to zero before square roots.
    pub fidelity_clamp: f64,
    /// Largest imaginary part discarded from an expectation value.
    pub imaginary_residue: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-12,
            unitary: 1e-10,
            normalization: 1e-10,
            min_eigenvalue: 1e-9,
            fidelity_clamp: 1e-6,
            imaginary_residue: 1e-10,
        }
    }
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Kronecker product of 2x2 factors, left-to-right in site order.
pub fn kron_chain(factors: &[CMatrix]) -> Result<CMatrix> {
    if factors.is_empty() {
        return Err(Error::structural("kron_chain needs at least one factor"));
    }
    let mut out = CMatrix::identity(1, 1);
    for (k, f) in factors.iter().enumerate() {
        if f.shape() != (2, 2) {
            return Err(Error::structural(format!(
                "factor {k} has shape {:?}, expected (2, 2)",
                f.shape()
            )));
        }
        out = out.kronecker(f);
    }
    Ok(out)
}

/// `op` acting on `site` (0-based) of an `n`-site chain.
pub fn site_operator(op: &CMatrix, site: usize, n: usize) -> Result<CMatrix> {
    if site >= n {
        return Err(Error::structural(format!("site {site} outside chain of {n}")));
    }
    let factors: Vec<CMatrix> = (0..n)
        .map(|k| if k == site { op.clone() } else { identity(2) })
        .collect();
    kron_chain(&factors)
}

/// Diagonal of `sigma^z` on `site` (0-based, site 0 is the most significant
/// bit of the basis index). `|0>` has eigenvalue +1.
pub fn sigma_z_diagonal(site: usize, n: usize) -> Vec<f64> {
    let shift = n - 1 - site;
    (0..1usize << n)
        .map(|b| if (b >> shift) & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `|M - M†|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && hermitian_defect(m) <= tol * max_abs(m).max(1.0)
}

pub fn ensure_hermitian(m: &CMatrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::structural(format!("{what} is not square")));
    }
    let tol = Tolerances::default().hermitian;
    if !is_hermitian(m, tol) {
        return Err(Error::contract(format!(
            "{what} is not Hermitian (defect {:.3e})",
            hermitian_defect(m)
        )));
    }
    Ok(())
}

pub fn unitary_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&v| C64::from(v)),
        ));
        &self.vectors * d * self.vectors.adjoint()
    }

    /// Apply `f` to the spectrum: `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = f(v);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn eigh(m: &CMatrix) -> Result<Eigh> {
    ensure_hermitian(m, "eigh input")?;
    Ok(eigh_unchecked(m))
}

/// Eigendecomposition of the Hermitian part `(M + M†)/2`, skipping the check.
pub fn eigh_unchecked(m: &CMatrix) -> Eigh {
    let n = m.nrows();
    if n == 0 {
        return Eigh {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let se = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Eigh { values, vectors }
}

/// Rotate `v` so its first entry with modulus above `tol` is real positive.
pub fn fix_phase(v: &mut CVector, tol: f64) {
    if let Some(z) = v.iter().find(|z| z.norm() > tol).copied() {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

/// `Tr[A ρ]` for a density matrix.
pub fn trace_product(a: &CMatrix, rho: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * rho[(k, i)];
        }
    }
    acc
}

/// Square root of a positive semidefinite matrix via its spectrum, clamping
/// eigenvalues in `(-clamp, 0)` to zero.
pub fn sqrt_psd(m: &CMatrix, clamp: f64) -> Result<CMatrix> {
    let eig = eigh_unchecked(m);
    if let Some(&low) = eig.values.first() {
        if low < -clamp {
            return Err(Error::contract(format!(
                "matrix has eigenvalue {low:.3e} below -{clamp:.0e}"
            )));
        }
    }
    Ok(eig.map(|v| C64::from(v.max(0.0).sqrt())))
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(ρ) σ sqrt(ρ)))^2`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    fidelity_with(rho, sigma, &Tolerances::default())
}

pub fn fidelity_with(rho: &CMatrix, sigma: &CMatrix, tol: &Tolerances) -> Result<f64> {
    if rho.shape() != sigma.shape() || !rho.is_square() {
        return Err(Error::structural(format!(
            "fidelity of {:?} and {:?}",
            rho.shape(),
            sigma.shape()
        )));
    }
    for (name, m) in [("rho", rho), ("sigma", sigma)] {
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::contract(format!("{name} has trace {tr}")));
        }
    }
    let root = sqrt_psd(rho, tol.fidelity_clamp)?;
    let inner = &root * sigma * &root;
    let eig = eigh_unchecked(&inner);
    if let Some(&low) = eig.values.first() {
        if low < -tol.fidelity_clamp {
            return Err(Error::contract(format!(
                "sigma is not positive semidefinite (eigenvalue {low:.3e})"
            )));
        }
    }
    let s: f64 = eig.values.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((s * s).clamp(0.0, 1.0))
}

/// Half the trace norm of `a - b` for Hermitian arguments.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let eig = eigh_unchecked(&(a - b));
    0.5 * eig.values.iter().map(|v| v.abs()).sum::<f64>()
}

/// Purity, oscillation amplitude and l1-coherence of a qubit Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurityAmplitude {
    pub purity: f64,
    pub amplitude: f64,
    pub coherence: f64,
    /// `A^2 + a_z^2 - (2P - 1)`; zero for every Bloch vector.
    pub identity_residual: f64,
    /// `A^2 + a_z^2 - (2P - 1)^2`; zero only on the pure-state sphere `|a| = 1`.
    pub pure_state_residual: f64,
}

pub fn purity_amplitude(bloch: [f64; 3]) -> Result<PurityAmplitude> {
    let [ax, ay, az] = bloch;
    let r2 = ax * ax + ay * ay + az * az;
    if r2.sqrt() > 1.0 + 1e-12 {
        return Err(Error::InvalidBloch(r2.sqrt()));
    }
    let purity = 0.5 * (1.0 + r2);
    let amplitude = (ax * ax + ay * ay).sqrt();
    let two_p = 2.0 * purity - 1.0;
    Ok(PurityAmplitude {
        purity,
        amplitude,
        coherence: 2.0 * amplitude,
        identity_residual: amplitude * amplitude + az * az - two_p,
        pure_state_residual: amplitude * amplitude + az * az - two_p * two_p,
    })
}
