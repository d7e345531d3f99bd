//! Simulation harness for `fdrpath`: scenario configuration and execution,
//! truth evaluation, CSV import and export, and SVG charts.

pub mod config;
pub mod error;
pub mod io;
pub mod scenario;
pub mod svg;
pub mod truth;

pub use config::{Method, ScenarioConfig};
pub use error::{HarnessError, Result};
pub use io::load_pvalues_csv;
pub use scenario::{run_scenario, ScenarioReport};
pub use truth::{evaluate_truth, TruthEval};

/// Environment variable holding the default output root.
pub const OUTPUT_ENV: &str = "FDRPATH_OUT";
