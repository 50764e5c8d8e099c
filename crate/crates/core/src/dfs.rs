//! Decoherence-free subspaces of a Hamiltonian / measurement-operator pair.
//!
//! A vector belongs to a decoherence-free subspace (DFS) when it is an
//! eigenvector of both `H` and `L`. Vectors sharing the same `L` eigenvalue
//! `c` form one subspace. Within each degenerate eigenspace of `H` we look for
//! the largest subspace that `L` maps into itself and diagonalize `L` there,
//! so an accidental degeneracy cannot hide DFS vectors behind leaking
//! partners.
//!
//! When `H` and `L` conserve a diagonal charge (total magnetization for the
//! XY chain) the search can be run sector by sector; every subspace then
//! carries the charge label of its sector.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::state::QuantumState;

/// Default residual tolerance for accepting a simultaneous eigenvector.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Relative gap below which two `H` eigenvalues count as degenerate.
pub const DEGENERACY_REL: f64 = 1e-9;
/// Loose residual used to pick candidates before the final residual check.
const CANDIDATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DfsSubspace {
    /// Eigenvalue of `L` on the subspace.
    pub c: f64,
    /// Value of the conserved charge, when the search was sector resolved.
    pub charge: Option<f64>,
    /// Orthonormal columns, ordered by energy.
    pub basis: CMatrix,
    pub energies: Vec<f64>,
    pub bohr_frequencies: Vec<f64>,
}

impl DfsSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.basis.column(k).into_owned()
    }

    /// Weight `Tr[ρ Π]` of a state on this subspace.
    pub fn overlap(&self, state: &QuantumState) -> f64 {
        match state {
            QuantumState::Pure(psi) => (self.basis.adjoint() * psi).norm_squared(),
            QuantumState::Density(rho) => {
                (self.basis.adjoint() * rho * &self.basis).trace().re
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct DfsDecomposition {
    pub dim: usize,
    pub subspaces: Vec<DfsSubspace>,
}

/// Largest deviations from the decomposition invariants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DfsChecks {
    pub max_l_residual: f64,
    pub max_h_residual: f64,
    pub max_idempotency_defect: f64,
    pub max_orthogonality_defect: f64,
    pub completeness_defect: f64,
}

impl DfsChecks {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_l_residual <= tol
            && self.max_h_residual <= tol
            && self.max_idempotency_defect <= tol
            && self.max_orthogonality_defect <= tol
            && self.completeness_defect <= tol
    }
}

impl DfsDecomposition {
    pub fn dims(&self) -> Vec<usize> {
        self.subspaces.iter().map(DfsSubspace::dim).collect()
    }

    pub fn dfs_dim(&self) -> usize {
        self.dims().iter().sum()
    }

    pub fn complement_dim(&self) -> usize {
        self.dim - self.dfs_dim()
    }

    pub fn complement_projector(&self) -> CMatrix {
        let mut p = CMatrix::identity(self.dim, self.dim);
        for s in &self.subspaces {
            p -= s.projector();
        }
        p
    }

    /// Residuals and projector identities, evaluated on the basis columns:
    /// `P² = P` iff `B†B = I`, and `P_k P_l = 0` iff `B_k†B_l = 0`.
    pub fn checks(&self, h: &CMatrix, l: &CMatrix) -> DfsChecks {
        let mut out = DfsChecks {
            max_l_residual: 0.0,
            max_h_residual: 0.0,
            max_idempotency_defect: 0.0,
            max_orthogonality_defect: 0.0,
            completeness_defect: 0.0,
        };
        for (k, s) in self.subspaces.iter().enumerate() {
            let lb = l * &s.basis;
            let hb = h * &s.basis;
            for (col, &e) in s.energies.iter().enumerate() {
                let v = s.basis.column(col);
                out.max_l_residual = out.max_l_residual.max((lb.column(col) - v * C64::from(s.c)).norm());
                out.max_h_residual = out.max_h_residual.max((hb.column(col) - v * C64::from(e)).norm());
            }
            let gram = s.basis.adjoint() * &s.basis;
            out.max_idempotency_defect = out
                .max_idempotency_defect
                .max(linalg::max_abs(&(gram - CMatrix::identity(s.dim(), s.dim()))));
            for t in &self.subspaces[k + 1..] {
                out.max_orthogonality_defect = out
                    .max_orthogonality_defect
                    .max(linalg::max_abs(&(s.basis.adjoint() * &t.basis)));
            }
        }
        // the complement is I - ΣP_k, so the sum is I by construction; what
        // remains is its trace, which must equal dim - Σ d_k
        let inside: f64 = self.subspaces.iter().map(|s| s.basis.norm_squared()).sum();
        out.completeness_defect = (inside - self.dfs_dim() as f64).abs();
        out
    }
}

/// Decoherence-free subspaces of `(h, l)`, grouped by the eigenvalue of `l`.
pub fn find_dfs(h: &CMatrix, l: &CMatrix, tol: f64) -> Result<DfsDecomposition> {
    linalg::ensure_hermitian(h, "Hamiltonian")?;
    linalg::ensure_hermitian(l, "measurement operator")?;
    if h.shape() != l.shape() {
        return Err(Error::structural(format!(
            "H is {:?} but L is {:?}",
            h.shape(),
            l.shape()
        )));
    }
    let found = simultaneous_eigenvectors(h, l, tol);
    let l_scale = linalg::max_abs(l).max(f64::MIN_POSITIVE);
    let subspaces = group_by_c(found, tol * l_scale.max(1.0), None, h.nrows(), tol);
    Ok(DfsDecomposition {
        dim: h.nrows(),
        subspaces,
    })
}

/// Same as [`find_dfs`], searching each sector of a conserved diagonal
/// `charge` separately and labelling the subspaces by sector.
pub fn find_dfs_resolved(
    h: &CMatrix,
    l: &CMatrix,
    charge: &[f64],
    tol: f64,
) -> Result<DfsDecomposition> {
    linalg::ensure_hermitian(h, "Hamiltonian")?;
    linalg::ensure_hermitian(l, "measurement operator")?;
    let n = h.nrows();
    if l.shape() != h.shape() || charge.len() != n {
        return Err(Error::structural("H, L and charge dimensions differ"));
    }
    let sectors = charge_sectors(charge);
    let scale = linalg::max_abs(h).max(linalg::max_abs(l)).max(1.0);
    for (name, m) in [("H", h), ("L", l)] {
        for i in 0..n {
            for j in 0..n {
                if charge[i] != charge[j] && m[(i, j)].norm() > 1e-12 * scale {
                    return Err(Error::contract(format!(
                        "{name} does not conserve the charge (entry {i},{j})"
                    )));
                }
            }
        }
    }
    let l_scale = linalg::max_abs(l).max(1.0);
    let mut subspaces = Vec::new();
    for (q, idx) in sectors {
        let hs = submatrix(h, &idx);
        let ls = submatrix(l, &idx);
        let found = simultaneous_eigenvectors(&hs, &ls, tol)
            .into_iter()
            .map(|(c, e, v)| (c, e, embed(&v, &idx, n)))
            .collect();
        subspaces.extend(group_by_c(found, tol * l_scale, Some(q), n, tol));
    }
    subspaces.sort_by(|a, b| {
        a.c.total_cmp(&b.c)
            .then(a.charge.unwrap_or(0.0).total_cmp(&b.charge.unwrap_or(0.0)))
    });
    Ok(DfsDecomposition { dim: n, subspaces })
}

/// Distinct charge values (ascending) with the basis indices carrying them.
pub fn charge_sectors(charge: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut values: Vec<f64> = charge.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .into_iter()
        .map(|q| {
            let idx = (0..charge.len()).filter(|&i| charge[i] == q).collect();
            (q, idx)
        })
        .collect()
}

fn submatrix(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

fn embed(v: &CVector, idx: &[usize], n: usize) -> CVector {
    let mut out = CVector::zeros(n);
    for (k, &i) in idx.iter().enumerate() {
        out[i] = v[k];
    }
    out
}

/// All simultaneous eigenvectors `(c, E, v)` of `(h, l)`.
fn simultaneous_eigenvectors(h: &CMatrix, l: &CMatrix, tol: f64) -> Vec<(f64, f64, CVector)> {
    let eig = linalg::eigh_unchecked(h);
    let gap = DEGENERACY_REL * linalg::max_abs(h);
    let l_scale = linalg::max_abs(l).max(1.0);
    let mut out = Vec::new();
    let n = eig.values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.values[end] - eig.values[end - 1] <= gap {
            end += 1;
        }
        let block = eig.vectors.columns(start, end - start).into_owned();
        if let Some(inv) = invariant_subspace(l, block, CANDIDATE_TOL * l_scale) {
            let lr = inv.adjoint() * l * &inv;
            let leig = linalg::eigh_unchecked(&lr);
            for k in 0..leig.values.len() {
                let v = &inv * leig.vectors.column(k);
                let c = (v.adjoint() * l * &v)[(0, 0)].re;
                if (l * &v - v.scale(c)).norm() <= tol * l_scale {
                    let e = (v.adjoint() * h * &v)[(0, 0)].re;
                    out.push((c, e, v));
                }
            }
        }
        start = end;
    }
    out
}

/// Largest subspace of span(`basis`) mapped into itself by `l`.
fn invariant_subspace(l: &CMatrix, mut basis: CMatrix, tol: f64) -> Option<CMatrix> {
    loop {
        let k = basis.ncols();
        if k == 0 {
            return None;
        }
        let lb = l * &basis;
        let inner = basis.adjoint() * &lb;
        let leak = &lb - &basis * inner;
        let gram = leak.adjoint() * &leak;
        let eig = linalg::eigh_unchecked(&gram);
        let keep: Vec<usize> = (0..k).filter(|&i| eig.values[i] <= tol * tol).collect();
        if keep.len() == k {
            return Some(basis);
        }
        if keep.is_empty() {
            return None;
        }
        let sel = CMatrix::from_fn(k, keep.len(), |i, j| eig.vectors[(i, keep[j])]);
        basis = basis * sel;
    }
}

fn group_by_c(
    mut found: Vec<(f64, f64, CVector)>,
    c_tol: f64,
    charge: Option<f64>,
    dim: usize,
    freq_tol: f64,
) -> Vec<DfsSubspace> {
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut groups: Vec<Vec<(f64, f64, CVector)>> = Vec::new();
    for item in found {
        match groups.last_mut() {
            Some(g) if (item.0 - g[0].0).abs() < c_tol => g.push(item),
            _ => groups.push(vec![item]),
        }
    }
    groups
        .into_iter()
        .map(|mut g| {
            g.sort_by(|a, b| a.1.total_cmp(&b.1));
            let c = g.iter().map(|x| x.0).sum::<f64>() / g.len() as f64;
            let energies: Vec<f64> = g.iter().map(|x| x.1).collect();
            let mut basis = CMatrix::zeros(dim, g.len());
            for (k, (_, _, v)) in g.iter_mut().enumerate() {
                linalg::fix_phase(v, 1e-8);
                basis.set_column(k, v);
            }
            let e_scale = energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
            let bohr_frequencies = distinct_gaps(&energies, freq_tol * e_scale);
            DfsSubspace {
                c,
                charge,
                basis,
                energies,
                bohr_frequencies,
            }
        })
        .collect()
}

fn distinct_gaps(energies: &[f64], tol: f64) -> Vec<f64> {
    let mut gaps = Vec::new();
    for i in 0..energies.len() {
        for j in i + 1..energies.len() {
            let g = (energies[i] - energies[j]).abs();
            if g > tol {
                gaps.push(g);
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for g in gaps {
        match out.last() {
            Some(&last) if g - last <= tol => {}
            _ => out.push(g),
        }
    }
    out
}

/// Distinct positive energy gaps of the subspace, merged within `tol`.
pub fn bohr_frequencies(sub: &DfsSubspace, tol: f64) -> Vec<f64> {
    distinct_gaps(&sub.energies, tol)
}

/// Weights `Tr[ρ Π_k]` on every subspace, followed by the complement.
pub fn overlaps(state: &QuantumState, dec: &DfsDecomposition) -> Result<Vec<f64>> {
    if state.dim() != dec.dim {
        return Err(Error::structural(format!(
            "state of dim {} against decomposition of dim {}",
            state.dim(),
            dec.dim
        )));
    }
    let mut out: Vec<f64> = dec.subspaces.iter().map(|s| s.overlap(state)).collect();
    let total = match state {
        QuantumState::Pure(v) => v.norm_squared(),
        QuantumState::Density(m) => m.trace().re,
    };
    out.push(total - out.iter().sum::<f64>());
    Ok(out)
}

/// How to scale the per-site oscillation pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenmodeScale {
    /// Raw oscillation amplitudes of the equal superposition.
    Physical,
    /// Largest absolute entry equal to one.
    UnitMax,
    /// Largest absolute entry equal to the given value.
    Max(f64),
}

/// Per-site amplitude and sign of the oscillating part of `<σ^z_j>(t)` for
/// the equal superposition of the two energy levels of a single-frequency
/// subspace. The first nonzero entry is made positive.
pub fn synchronized_eigenmode(
    sz_diagonals: &[Vec<f64>],
    sub: &DfsSubspace,
    scale: EigenmodeScale,
) -> Result<Vec<f64>> {
    if sub.bohr_frequencies.len() != 1 {
        return Err(Error::UnsupportedMode(format!(
            "subspace supports {} Bohr frequencies {:?}; use spectral analysis of the trajectory instead",
            sub.bohr_frequencies.len(),
            sub.bohr_frequencies
        )));
    }
    let lam = sub.bohr_frequencies[0];
    // pick the lowest-energy pair separated by the frequency
    let e = &sub.energies;
    let tol = 1e-7 * lam.max(1.0);
    let (a, b) = (0..e.len())
        .flat_map(|i| (i + 1..e.len()).map(move |j| (i, j)))
        .find(|&(i, j)| ((e[j] - e[i]).abs() - lam).abs() < tol)
        .ok_or_else(|| Error::UnsupportedMode("no level pair at the Bohr frequency".into()))?;
    let va = sub.vector(a);
    let vb = sub.vector(b);
    let coeffs: Vec<C64> = sz_diagonals
        .iter()
        .map(|diag| {
            va.iter()
                .zip(vb.iter())
                .zip(diag.iter())
                .map(|((x, y), s)| x.conj() * y * *s)
                .sum()
        })
        .collect();
    let reference = coeffs
        .iter()
        .find(|z| z.norm() > 1e-9)
        .copied()
        .unwrap_or(C64::from(1.0));
    let phase = reference.conj() / reference.norm();
    let mut pattern: Vec<f64> = coeffs
        .iter()
        .map(|z| {
            let r = z * phase;
            r.norm() * r.re.signum()
        })
        .map(|x| if x.abs() < 1e-12 { 0.0 } else { x })
        .collect();
    let max = pattern.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let factor = match scale {
        EigenmodeScale::Physical => 1.0,
        EigenmodeScale::UnitMax => 1.0 / max,
        EigenmodeScale::Max(v) => v / max,
    };
    pattern.iter_mut().for_each(|x| *x *= factor);
    Ok(pattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli_z;

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            v.len(),
            v.iter().map(|&x| C64::from(x)),
        ))
    }

    #[test]
    fn identity_measurement_is_one_subspace() {
        let h = diag(&[0.0, 1.0, 3.0, 7.0]);
        let dec = find_dfs(&h, &CMatrix::identity(4, 4), DEFAULT_TOL).unwrap();
        assert_eq!(dec.dims(), vec![4]);
        assert!((dec.subspaces[0].c - 1.0).abs() < 1e-12);
        assert_eq!(dec.complement_dim(), 0);
        assert_eq!(dec.subspaces[0].bohr_frequencies, vec![1.0, 2.0, 3.0, 4.0, 6.0, 7.0]);
    }

    #[test]
    fn one_dimensional_subspace_has_no_frequency() {
        let h = diag(&[0.0, 1.0]);
        let dec = find_dfs(&h, &pauli_z(), DEFAULT_TOL).unwrap();
        assert_eq!(dec.dims(), vec![1, 1]);
        assert!(dec.subspaces.iter().all(|s| s.bohr_frequencies.is_empty()));
    }

    #[test]
    fn non_commuting_pair_has_no_dfs() {
        let h = crate::linalg::pauli_x();
        let dec = find_dfs(&h, &pauli_z(), DEFAULT_TOL).unwrap();
        assert!(dec.subspaces.is_empty());
        assert_eq!(dec.complement_dim(), 2);
        let checks = dec.checks(&h, &pauli_z());
        assert!(checks.passes(1e-12));
    }

    #[test]
    fn accidental_degeneracy_does_not_hide_dfs_vector() {
        // |0> is a DFS state degenerate with a leaking state (|1>+|2>)/sqrt2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut basis = CMatrix::zeros(3, 3);
        basis[(0, 0)] = C64::from(1.0);
        basis[(1, 1)] = C64::from(s);
        basis[(2, 1)] = C64::from(s);
        basis[(1, 2)] = C64::from(s);
        basis[(2, 2)] = C64::from(-s);
        let h = &basis * diag(&[2.0, 2.0, 5.0]) * basis.adjoint();
        let l = diag(&[2.0, 2.0, -1.0]);
        let dec = find_dfs(&h, &l, DEFAULT_TOL).unwrap();
        assert_eq!(dec.dims(), vec![1]);
        assert!((dec.subspaces[0].c - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::from(1.0);
        assert!(matches!(
            find_dfs(&m, &pauli_z(), DEFAULT_TOL),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn gaps_are_merged() {
        assert_eq!(distinct_gaps(&[0.0, 1.0, 2.0], 1e-9), vec![1.0, 2.0]);
        assert!(distinct_gaps(&[4.0], 1e-9).is_empty());
    }
}
