//! Deterministic single-intersection traffic laboratory: microsimulation,
//! signal controllers (fixed-time, actuated, learned), surrogate safety and
//! emission metrics, and a dueling double deep Q-network agent trained on a
//! multi-objective reward.

pub mod agent;
pub mod config;
pub mod emissions;
pub mod encoding;
pub mod harness;
pub mod rng;
pub mod rewards;
pub mod safety;
pub mod signal;
pub mod sim;

pub use config::ScenarioConfig;
pub use harness::{run_compare, run_eval, run_training, HarnessError};
pub use signal::ControllerKind;
pub use sim::Simulation;
