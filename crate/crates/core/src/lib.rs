//! Relay-assisted mmWave access: link budgets, BS/relay association as a
//! coalition game, superframe slot scheduling and experiment sweeps.

pub mod coalition;
pub mod config;
pub mod experiment;
pub mod link_model;
pub mod scenario;
pub mod scheduler;

pub use coalition::{FlowId, Partition, RateTable, Side};
pub use config::{load_config, parse_config, ConfigError};
pub use experiment::{run_single, run_sweep, ExperimentError, Format, RunRecord, SweepParam, SweepSpec};
pub use link_model::RadioConfig;
pub use scenario::{generate_scenario, Policy, RelayMode, Scenario, ScenarioConfig};
pub use scheduler::{schedule_greedy, Schedule, ScheduleOptions};
