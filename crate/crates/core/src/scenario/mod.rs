//! Scenario files, seeded campaigns, and the reports behind the `ehwsim`
//! command line.

mod budget;
mod campaign;
mod format;

use thiserror::Error;

use crate::analog::BenchmarkError;
use crate::device::DeviceError;
use crate::evolution::EngineError;

pub use budget::{
    render_device_table, BudgetError, BudgetQuery, BudgetReport, QUOTED_EVALUATIONS,
    REFERENCE_EVALUATIONS,
};
pub use campaign::{
    render_report, run_campaign, run_seed, write_artifacts, Campaign, CampaignReport, SeedRun,
    SeedSummary,
};
pub use format::{load_scenario, parse_scenario, Scenario, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{origin}:{line}:{column}: {message}")]
    At {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: {message}")]
    Invalid { origin: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
}
