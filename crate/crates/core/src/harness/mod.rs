//! Scenarios, the closed-loop runner, metrics and CSV traces.

pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod trace;
pub mod verify;

pub use metrics::Metrics;
pub use runner::{run_scenario, ScenarioRun};
pub use scenario::{builtin, builtin_scenarios, Builtin, ScenarioConfig};
pub use trace::{emit_csv, Trace, TraceRow};
