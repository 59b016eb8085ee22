//! Off-policy prediction benchmark on the four-rooms gridworld: environment, features,
//! learners, ground-truth oracles, error metrics and the sweep harness.

pub mod error;
pub mod features;
pub mod grid;
pub mod learners;
pub mod lstd;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod subtask;
pub mod sweep;
pub mod task;
pub mod trajectory;

pub use error::{Error, Result};
pub use features::{FeatureTable, FeatureVector, TileCoder, TileCoderConfig};
pub use grid::{build_grid, Action, Cell, GridSpec, Variant};
pub use learners::{Algorithm, AlgorithmParams, LearnerBank, LearnerState};
pub use subtask::{SubTask, GAMMA};
pub use task::Task;
