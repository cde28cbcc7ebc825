//! Configuration, ε-sweeps, rate fitting, reports and the acceptance suite.

pub mod config;
pub mod rate;
pub mod report;
pub mod sweep;
pub mod verify;

pub use config::{InitProfile, RawConfig, RunConfig};
pub use rate::fit_rate;
pub use report::{emit_report, read_report, ConvergenceReport, ReportRow};
pub use sweep::{run_sweep, SweepConfig};
