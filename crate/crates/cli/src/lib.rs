//! Command-line front end: TOML scenario configs in, CSV and report files out.
//!
//! Exit codes: 0 success, 2 config or schema error, 3 computation error,
//! 4 I/O error.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;

pub use commands::{run, Cli, Command};
pub use config::RunConfig;
pub use error::{CliError, Result};
