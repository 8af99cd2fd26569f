//! Experiment harness: bundled scenarios, optimized-vs-raw energy
//! comparisons, and the budget-matched four-method switching-point
//! benchmark, with JSON/CSV report emission.

pub mod compare;
pub mod report;
pub mod scenario;

pub use compare::{run_method_comparison, run_scenario, HarnessError};
pub use report::ComparisonReport;
pub use scenario::{builtin_scenario, bundled_scenarios, load_scenario_file, Scenario};
