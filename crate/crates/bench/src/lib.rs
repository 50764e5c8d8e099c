//! Fixtures shared by the benchmarks.

use qsync_core::chain::realize_initial_state;
use qsync_core::engine::Workspace;
use qsync_core::{ChainModel, ChainParams, InitialKind, InitialStateSpec, InitialTerm, PureEnsemble, Result};

/// The N = 8 chain monitored at site 3 with the 2:3 mixture of the
/// `c = -1` subspace and its sector complement, reduced to its working space.
pub fn n8_mixture() -> Result<(ChainModel, Workspace, PureEnsemble)> {
    let model = ChainModel::build(ChainParams::new(8, 0.7 / std::f64::consts::PI, 3))?;
    let dfs = model.dfs()?;
    let spec = InitialStateSpec {
        kind: InitialKind::Mixture,
        terms: vec![
            InitialTerm::dfs(-1.0, Some(-6)).with_weight(0.4),
            InitialTerm::complement(-6).with_weight(0.6),
        ],
    };
    let initial = realize_initial_state(&spec, &model, &dfs)?;
    let (ws, reduced) = Workspace::for_ensemble(&model, &dfs, &initial)?;
    Ok((model, ws, reduced))
}

/// `cos(2t)` sampled every 0.05 over `[0, span]`.
pub fn cosine(span: f64) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = (0..=(span / 0.05) as usize).map(|k| k as f64 * 0.05).collect();
    let y = t.iter().map(|t| (2.0 * t).cos()).collect();
    (t, y)
}
