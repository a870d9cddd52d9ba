//! Configuration-driven front end: parse a run file, execute one command,
//! write CSV/JSON reports.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_at, Command, ConfigError, Format, RunConfig};
pub use run::{run, Outcome, Verdict};
