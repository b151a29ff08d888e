//! Simulation of a measurement-feedback quantum heat engine. A system
//! exchanges energy with thermal reservoirs while a measured ancilla,
//! possibly correlated with a quantum memory, steers the feedback.
//!
//! [`run_engine`] produces every intermediate state; [`BoundReport`] turns a
//! run into energies and second-law style bounds on the extracted work.

pub mod engine;
pub mod entropy;
pub mod error;
pub mod linalg;
pub mod optimize;
pub mod report;
pub mod scenario;
pub mod states;
pub mod sweep;
pub mod uncertainty;

pub use engine::{run_engine, BoundReport, Check, CheckKind, EngineScenario, StageTrace};
pub use error::{Error, Result};
pub use report::{run_scenario, RunReport};
pub use scenario::{builtin, load_scenario, parse_scenario_str, Scenario, BUILTIN_NAMES};
