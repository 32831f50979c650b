//! Scenario-driven front end for the `togglemem` simulator.

pub mod examples;
pub mod generator;
pub mod run;
pub mod scenario;
pub mod units;

pub use run::{compare_to_baseline, run_scenario, RunError, RunReport};
pub use scenario::{parse_scenario, Scenario, ScenarioError};
