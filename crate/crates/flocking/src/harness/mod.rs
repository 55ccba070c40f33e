//! Scenario configuration, initial-condition samplers, experiment drivers
//! and CSV persistence.

pub mod config;
pub mod experiments;
pub mod init;
pub mod io;

pub use config::{KernelConfig, ScenarioConfig, ScenarioKind};
pub use init::{sample_initial, InitialDistribution};
