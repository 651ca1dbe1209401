//! Scenario runner for the OTDM simulator: JSON scenarios in, metric
//! reports and plot data out.

pub mod error;
pub mod output;
pub mod runner;
pub mod scenario;
pub mod sweep;

pub use error::{CliError, Result};
pub use runner::{run_scenario, ReportBundle, Runner};
pub use scenario::Scenario;
