//! Scenario configuration, the simulation loop, run outputs and the policy
//! training loop.

mod config;
mod output;
mod records;
mod run;
mod sim;
mod train;

pub use config::{hex_digest, FleetStart, ScenarioConfig};
pub use output::{write_run, Manifest, OUTPUT_FILES};
pub use records::{DecisionRow, FleetRow, MatchRow, PerformanceRow, Records, StrandedRow, TrafficRow, UserRow};
pub use run::{baseline, baseline_config, performance_curve, run, run_with_baseline, Baseline, RunReport};
pub use sim::{Learner, Simulation, Summary, UserState};
pub use train::{evaluate_policy, initial_policy, train, TrainOptions, TrainOutcome};
