//! Quantum-trajectory engine for measurement-induced synchronization in
//! continuously monitored XY spin chains.
//!
//! The crate builds the chain operators, finds decoherence-free subspaces,
//! integrates homodyne and classical-noise trajectories together with the
//! Lindblad ensemble average, and analyses trapping, synchronization and
//! ergodicity of the resulting ensembles.

pub mod analysis;
pub mod chain;
pub mod dfs;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod report;
pub mod scenario;
pub mod state;

pub use chain::{ChainModel, ChainParams, InitialKind, InitialStateSpec, InitialTerm};
pub use dfs::{DfsDecomposition, DfsSubspace};
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, Tolerances, C64};
pub use state::{PureEnsemble, QuantumState};
