//! Experiment driver for the particle solver: configuration, the
//! `simulate`/`converge`/`asymptote`/`reproduce` modes, and their CSV, TOML
//! and SVG artifacts.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod error;
pub mod expr;
pub mod modes;
pub mod plot;
pub mod presets;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use modes::{run, Mode, Outcome};
