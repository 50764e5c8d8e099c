//! Time evolution of monitored chains.

pub mod lindblad;
pub mod noise;
pub mod steppers;
pub mod trajectory;
pub mod workspace;

pub use lindblad::{evolve_lindblad, LindbladRecord};
pub use noise::NoiseStream;
pub use steppers::{step_heun, step_sme, step_sse};
pub use trajectory::{
    evolve_trajectory, IntegratorConfig, NoiseKind, RecordOptions, Scheme, Trapping,
    TrappingConfig, TrajectoryRecord,
};
pub use workspace::{Block, Workspace};
