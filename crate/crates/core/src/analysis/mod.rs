//! Post-processing of trajectory ensembles.

pub mod ergodicity;
pub mod stats;
pub mod sync;

pub use ergodicity::{ergodicity_fidelity, ErgodicityReport};
pub use stats::{
    hitting_time_stats, multiplexing_report, stationary_histogram, FrequencyHistogram,
    HittingTimeStats, MeanEstimate, StationaryHistogram,
};
pub use sync::{detect_sync, PhaseRelation, SinusoidFit, SyncThresholds, SyncVerdict};
