//! Orchestration: configuration, the stepping engine, run files, the
//! multi-observer harness and the network service.

pub mod config;
pub mod digest;
pub mod engine;
pub mod observers;
pub mod protocol;
pub mod record;
pub mod server;

pub use config::{ModuleParams, NoiseOperator, NoiseSpec, ObserverSpec, Schedule, Screening, SessionConfig};
pub use engine::{first_divergence, run_scripted, Engine, GazeEvent, Runner};
pub use record::{replay, ReplayReport, RunRecord, RunStatus};
