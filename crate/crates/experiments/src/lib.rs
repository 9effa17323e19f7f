//! Scenario configuration, CSV output and figure recipes on top of
//! `riss-core`.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod plan;
pub mod scenario;

pub use config::ScenarioConfig;
pub use error::{ExperimentError, Result};
pub use output::{Method, ResultRow};
