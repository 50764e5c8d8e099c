//! Working subspace of a run.
//!
//! `H` and `L` conserve total magnetization, so a trajectory never leaves the
//! magnetization sectors its initial state occupies. Runs are integrated in
//! the span of those sectors; blocks are the DFS lying inside it plus the
//! complement `p` of their union within it.

use crate::chain::ChainModel;
use crate::dfs::DfsDecomposition;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::state::PureEnsemble;

/// Squared amplitude below which a sector counts as unoccupied.
const OCCUPIED: f64 = 1e-24;

#[derive(Debug, Clone)]
pub struct Block {
    /// `q1`, `q2`, ... in DFS order; the complement is not a `Block`.
    pub label: String,
    /// `c/√Γ`.
    pub c: f64,
    pub magnetization: Option<f64>,
    /// Orthonormal columns in working-space coordinates.
    pub basis: CMatrix,
    pub energies: Vec<f64>,
    pub bohr_frequencies: Vec<f64>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub n_sites: usize,
    pub full_dim: usize,
    /// Full-space basis indices spanning the working space, ascending.
    pub indices: Vec<usize>,
    pub hamiltonian: CMatrix,
    pub measurement: CMatrix,
    /// Diagonal of `L` (equal to the classical noise generator `G`).
    pub l_diag: Vec<f64>,
    /// Diagonals of `σ^z_j` for each site.
    pub sz: Vec<Vec<f64>>,
    pub blocks: Vec<Block>,
}

impl Workspace {
    /// Working space of the sectors touched by `initial`, with the initial
    /// ensemble mapped into it.
    pub fn for_ensemble(
        model: &ChainModel,
        dfs: &DfsDecomposition,
        initial: &PureEnsemble,
    ) -> Result<(Workspace, PureEnsemble)> {
        let dim = model.dim();
        if initial.dim() != dim {
            return Err(Error::structural(format!(
                "initial state of dim {} for a model of dim {dim}",
                initial.dim()
            )));
        }
        let mut sectors: Vec<f64> = Vec::new();
        for (_, psi) in &initial.members {
            for (b, z) in psi.iter().enumerate() {
                let q = model.magnetization[b];
                if z.norm_sqr() > OCCUPIED && !sectors.contains(&q) {
                    sectors.push(q);
                }
            }
        }
        let indices: Vec<usize> = (0..dim)
            .filter(|&b| sectors.contains(&model.magnetization[b]))
            .collect();
        let ws = Workspace::on_indices(model, dfs, indices)?;
        let members = initial
            .members
            .iter()
            .map(|(w, psi)| {
                let r = ws.reduce(psi);
                let n = r.norm();
                (*w, r.unscale(n))
            })
            .collect();
        Ok((ws, PureEnsemble::new(members)?))
    }

    /// The whole Hilbert space.
    pub fn full(model: &ChainModel, dfs: &DfsDecomposition) -> Result<Workspace> {
        Workspace::on_indices(model, dfs, (0..model.dim()).collect())
    }

    fn on_indices(model: &ChainModel, dfs: &DfsDecomposition, indices: Vec<usize>) -> Result<Workspace> {
        let d = indices.len();
        if d == 0 {
            return Err(Error::config("initial state is zero"));
        }
        let pick = |m: &CMatrix| CMatrix::from_fn(d, d, |i, j| m[(indices[i], indices[j])]);
        let hamiltonian = pick(&model.hamiltonian);
        let measurement = pick(&model.measurement);
        let l_diag = measurement.diagonal().iter().map(|z| z.re).collect();
        let sz = model
            .sz
            .iter()
            .map(|s| indices.iter().map(|&b| s[b]).collect())
            .collect();
        let mut blocks = Vec::new();
        for sub in &dfs.subspaces {
            let inside: f64 = indices
                .iter()
                .map(|&b| sub.basis.row(b).norm_squared())
                .sum();
            let total = sub.dim() as f64;
            if inside < 1e-10 {
                continue;
            }
            if (inside - total).abs() > 1e-10 {
                return Err(Error::structural(
                    "a DFS straddles the boundary of the working space",
                ));
            }
            let basis = CMatrix::from_fn(d, sub.dim(), |i, j| sub.basis[(indices[i], j)]);
            blocks.push(Block {
                label: format!("q{}", blocks.len() + 1),
                c: model.normalized_c(sub.c),
                magnetization: sub.charge,
                basis,
                energies: sub.energies.clone(),
                bohr_frequencies: sub.bohr_frequencies.clone(),
            });
        }
        Ok(Workspace {
            n_sites: model.params.n,
            full_dim: model.dim(),
            indices,
            hamiltonian,
            measurement,
            l_diag,
            sz,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Column labels of the overlap vector: blocks then `p`.
    pub fn labels(&self) -> Vec<String> {
        self.blocks
            .iter()
            .map(|b| b.label.clone())
            .chain(std::iter::once("p".to_string()))
            .collect()
    }

    pub fn n_overlaps(&self) -> usize {
        self.blocks.len() + 1
    }

    pub fn reduce(&self, psi: &CVector) -> CVector {
        CVector::from_iterator(self.dim(), self.indices.iter().map(|&b| psi[b]))
    }

    pub fn embed(&self, psi: &CVector) -> CVector {
        let mut out = CVector::zeros(self.full_dim);
        for (k, &b) in self.indices.iter().enumerate() {
            out[b] = psi[k];
        }
        out
    }

    pub fn embed_density(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.full_dim, self.full_dim);
        for (i, &a) in self.indices.iter().enumerate() {
            for (j, &b) in self.indices.iter().enumerate() {
                out[(a, b)] = rho[(i, j)];
            }
        }
        out
    }

    /// Block weights of a pure state, complement last.
    pub fn overlaps_pure(&self, psi: &CVector, out: &mut [f64]) {
        let total = psi.norm_squared();
        let mut inside = 0.0;
        for (k, b) in self.blocks.iter().enumerate() {
            let mut w = 0.0;
            for col in b.basis.column_iter() {
                w += col.dotc(psi).norm_sqr();
            }
            out[k] = w;
            inside += w;
        }
        out[self.blocks.len()] = (total - inside).max(0.0);
    }

    pub fn overlaps_ensemble(&self, members: &[(f64, CVector)]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_overlaps()];
        let mut buf = vec![0.0; self.n_overlaps()];
        self.overlaps_ensemble_into(members, &mut acc, &mut buf);
        acc
    }

    /// Allocation-free [`Workspace::overlaps_ensemble`]; `buf` is scratch.
    pub fn overlaps_ensemble_into(&self, members: &[(f64, CVector)], out: &mut [f64], buf: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (w, psi) in members {
            self.overlaps_pure(psi, buf);
            for (a, b) in out.iter_mut().zip(buf.iter()) {
                *a += w * b;
            }
        }
    }

    pub fn overlaps_density(&self, rho: &CMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_overlaps());
        let mut inside = 0.0;
        for b in &self.blocks {
            let w = (b.basis.adjoint() * rho * &b.basis).trace().re;
            inside += w;
            out.push(w);
        }
        out.push(rho.trace().re - inside);
        out
    }

    /// `<σ^z_j>` for every site.
    pub fn magnetizations(&self, populations: &[f64]) -> Vec<f64> {
        self.sz
            .iter()
            .map(|s| s.iter().zip(populations).map(|(a, p)| a * p).sum())
            .collect()
    }

    pub fn populations_ensemble(&self, members: &[(f64, CVector)]) -> Vec<f64> {
        let mut pop = vec![0.0; self.dim()];
        for (w, psi) in members {
            for (p, z) in pop.iter_mut().zip(psi.iter()) {
                *p += w * z.norm_sqr();
            }
        }
        pop
    }

    pub fn populations_density(&self, rho: &CMatrix) -> Vec<f64> {
        rho.diagonal().iter().map(|z| z.re).collect()
    }

    /// Orthonormal basis of the complement of all blocks.
    pub fn complement_basis(&self) -> CMatrix {
        let d = self.dim();
        let mut p = CMatrix::identity(d, d);
        for b in &self.blocks {
            p -= &b.basis * b.basis.adjoint();
        }
        let eig = linalg::eigh_unchecked(&p);
        let keep: Vec<usize> = (0..d).filter(|&k| eig.values[k] > 0.5).collect();
        CMatrix::from_fn(d, keep.len(), |i, j| eig.vectors[(i, keep[j])])
    }

    /// Basis of block `k`, where `k == blocks.len()` is the complement.
    pub fn block_basis(&self, k: usize) -> CMatrix {
        if k < self.blocks.len() {
            self.blocks[k].basis.clone()
        } else {
            self.complement_basis()
        }
    }

    pub fn density(members: &[(f64, CVector)]) -> CMatrix {
        let d = members.first().map_or(0, |m| m.1.len());
        let mut rho = CMatrix::zeros(d, d);
        for (w, psi) in members {
            rho += (psi * psi.adjoint()).scale(*w);
        }
        rho
    }
}

/// `acc += w·m`.
pub fn add_scaled(acc: &mut CMatrix, m: &CMatrix, w: f64) {
    acc.zip_apply(m, |a, b| *a += b * C64::from(w));
}
