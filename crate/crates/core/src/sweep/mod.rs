//! Parameter sweeps: plan construction, configuration files, execution and storage.

pub mod config;
pub mod execute;
pub mod plan;
pub mod store;

pub use execute::{execute, resume, run_instance, Context, ExecuteReport, RunOutcome, WorkItem};
pub use plan::{build_plan, Instance, Overrides, ParamGrid, Profile, SweepPlan};
pub use store::{RunRecord, Store};
