//! Command-line front end for the budgetsim simulator: scenario configs,
//! single runs, parameter sweeps, config generation and post-hoc trace
//! invariant checks.

pub mod check;
pub mod commands;
pub mod config;
pub mod error;

pub use check::{check_trace, CheckOutcome, Report};
pub use commands::{cmd_check_trace, cmd_gen_config, cmd_run, cmd_sweep, Experiment};
pub use config::ConfigFile;
pub use error::CliError;
