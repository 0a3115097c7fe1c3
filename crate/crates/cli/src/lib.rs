//! Config-driven batch front-end: TOML in, CSV out.

pub mod config;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig, ENV_PREFIX};
pub use run::{run_subcommand, Check, Command, Report, RunError, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK};
