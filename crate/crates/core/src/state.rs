//! Pure states, density matrices and weighted pure-state ensembles.

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, Tolerances, C64};

#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(CVector),
    Density(CMatrix),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Density(m) => m.nrows(),
        }
    }

    pub fn to_density(&self) -> CMatrix {
        match self {
            QuantumState::Pure(v) => v * v.adjoint(),
            QuantumState::Density(m) => m.clone(),
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            QuantumState::Pure(v) => v.norm_squared().powi(2),
            QuantumState::Density(m) => linalg::trace_product(m, m).re,
        }
    }

    /// Checks the normalization, Hermiticity and positivity invariants.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        match self {
            QuantumState::Pure(v) => {
                let norm = v.norm();
                if (norm - 1.0).abs() > tol.normalization {
                    return Err(Error::contract(format!("state norm {norm}")));
                }
            }
            QuantumState::Density(m) => {
                let tr = m.trace();
                if (tr.re - 1.0).abs() > tol.normalization || tr.im.abs() > tol.normalization {
                    return Err(Error::contract(format!("density matrix trace {tr}")));
                }
                if !linalg::is_hermitian(m, tol.hermitian) {
                    return Err(Error::contract("density matrix is not Hermitian"));
                }
                let low = linalg::eigh_unchecked(m).values[0];
                if low < -tol.min_eigenvalue {
                    return Err(Error::contract(format!(
                        "density matrix eigenvalue {low:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `Tr[A ρ]` (or `<ψ|A|ψ>`) for Hermitian `A`.
pub fn expectation(state: &QuantumState, a: &CMatrix) -> Result<f64> {
    if a.nrows() != state.dim() || !a.is_square() {
        return Err(Error::structural(format!(
            "operator {:?} on state of dim {}",
            a.shape(),
            state.dim()
        )));
    }
    let value: C64 = match state {
        QuantumState::Pure(v) => (v.adjoint() * a * v)[(0, 0)],
        QuantumState::Density(m) => linalg::trace_product(a, m),
    };
    let tol = Tolerances::default().imaginary_residue * linalg::max_abs(a).max(1.0);
    if value.im.abs() > tol {
        return Err(Error::contract(format!(
            "expectation has imaginary part {:.3e}; operator not Hermitian?",
            value.im
        )));
    }
    Ok(value.re)
}

/// `Σ_m u_m |ψ_m><ψ_m|` with probabilities `u_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureEnsemble {
    pub members: Vec<(f64, CVector)>,
}

impl PureEnsemble {
    pub fn new(members: Vec<(f64, CVector)>) -> Result<Self> {
        let ens = PureEnsemble { members };
        ens.validate()?;
        Ok(ens)
    }

    pub fn pure(psi: CVector) -> Self {
        PureEnsemble {
            members: vec![(1.0, psi)],
        }
    }

    pub fn dim(&self) -> usize {
        self.members.first().map_or(0, |(_, v)| v.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::contract("empty ensemble"));
        }
        let dim = self.dim();
        let mut total = 0.0;
        for (w, v) in &self.members {
            if *w < 0.0 {
                return Err(Error::contract(format!("negative ensemble weight {w}")));
            }
            if v.len() != dim {
                return Err(Error::structural("ensemble members differ in dimension"));
            }
            if (v.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::contract("ensemble member not normalized"));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::contract(format!("ensemble weights sum to {total}")));
        }
        Ok(())
    }

    pub fn to_density(&self) -> CMatrix {
        let dim = self.dim();
        let mut rho = CMatrix::zeros(dim, dim);
        for (w, v) in &self.members {
            rho += (v * v.adjoint()).scale(*w);
        }
        rho
    }

    /// A single member collapses to a pure state.
    pub fn to_state(&self) -> QuantumState {
        match self.members.as_slice() {
            [(_, v)] => QuantumState::Pure(v.clone()),
            _ => QuantumState::Density(self.to_density()),
        }
    }

    /// `Tr[ρ²] = Σ u_m u_n |<ψ_m|ψ_n>|²`.
    pub fn purity(&self) -> f64 {
        let mut p = 0.0;
        for (wa, a) in &self.members {
            for (wb, b) in &self.members {
                p += wa * wb * a.dotc(b).norm_sqr();
            }
        }
        p
    }
}
