//! Batch front end for the splitlab experiments: TOML run configs in,
//! CSV and JSON artifacts out.

pub mod config;
mod error;
pub mod experiments;
pub mod reproduce;

pub use config::RunConfig;
pub use error::CliError;
