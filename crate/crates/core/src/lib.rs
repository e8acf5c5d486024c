//! Vertex-reinforced random walks on the integer lattice: simulation,
//! martingale instrumentation with path-wise checkers, and numerical
//! study of the companion minimization problem.

pub mod config;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod lemma;
pub mod martingale;
pub mod record;
pub mod rng;
pub mod sum;
pub mod walk;
pub mod weights;

pub use error::{Error, Result};
pub use martingale::{AParams, MartingaleState};
pub use rng::StreamSeed;
pub use walk::{run_trajectory, Step, StopRule, TrajectoryRecord, TrajectorySummary, WalkState};
pub use weights::{WeightFunction, WeightSpec};
