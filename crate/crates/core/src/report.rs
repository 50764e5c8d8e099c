//! Serializable description of a chain's decoherence-free subspaces.

use serde::Serialize;

use crate::chain::{ChainModel, ChainParams};
use crate::dfs::{synchronized_eigenmode, DfsChecks, EigenmodeScale};
use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct SubspaceReport {
    /// `c/√Γ`.
    pub c: f64,
    pub magnetization: Option<f64>,
    pub dim: usize,
    pub energies: Vec<f64>,
    pub bohr_frequencies: Vec<f64>,
    /// Unit-max per-site oscillation pattern; present for single-frequency
    /// subspaces only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenmode: Option<Vec<f64>>,
}

/// Subspaces sharing one value of `c`, across magnetization sectors.
#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub c: f64,
    pub dim: usize,
    pub bohr_frequencies: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DfsReport {
    pub params: ChainParams,
    pub hilbert_dim: usize,
    pub subspaces: Vec<SubspaceReport>,
    pub groups: Vec<GroupReport>,
    pub dims: Vec<usize>,
    pub complement_dim: usize,
    pub checks: DfsChecks,
    pub seconds: f64,
}

/// Relative tolerance for merging `c` values and frequencies across sectors.
const MERGE_TOL: f64 = 1e-8;

fn merge_sorted(values: &mut Vec<f64>) {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= MERGE_TOL * b.abs().max(1.0));
}

pub fn dfs_report(params: ChainParams) -> Result<DfsReport> {
    let start = std::time::Instant::now();
    let model = ChainModel::build(params)?;
    let dec = model.dfs()?;
    let checks = dec.checks(&model.hamiltonian, &model.measurement);
    let subspaces: Vec<SubspaceReport> = dec
        .subspaces
        .iter()
        .map(|s| SubspaceReport {
            c: model.normalized_c(s.c),
            magnetization: s.charge,
            dim: s.dim(),
            energies: s.energies.clone(),
            bohr_frequencies: s.bohr_frequencies.clone(),
            eigenmode: synchronized_eigenmode(&model.sz, s, EigenmodeScale::UnitMax).ok(),
        })
        .collect();
    let mut groups: Vec<GroupReport> = Vec::new();
    for s in &subspaces {
        match groups
            .iter_mut()
            .find(|g| (g.c - s.c).abs() <= MERGE_TOL * s.c.abs().max(1.0))
        {
            Some(g) => {
                g.dim += s.dim;
                g.bohr_frequencies.extend(&s.bohr_frequencies);
                merge_sorted(&mut g.bohr_frequencies);
            }
            None => groups.push(GroupReport {
                c: s.c,
                dim: s.dim,
                bohr_frequencies: s.bohr_frequencies.clone(),
            }),
        }
    }
    Ok(DfsReport {
        params,
        hilbert_dim: model.dim(),
        dims: dec.dims(),
        complement_dim: dec.complement_dim(),
        subspaces,
        groups,
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_report_is_complete() {
        let r = dfs_report(ChainParams::new(2, 0.5, 1)).unwrap();
        assert!(r.checks.passes(1e-9));
        assert_eq!(r.dims.iter().sum::<usize>() + r.complement_dim, 4);
    }
}
