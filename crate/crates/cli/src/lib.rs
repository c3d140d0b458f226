//! Batch front end for the `nvmag-core` magnetometry toolkit: TOML run
//! configuration, CSV ingestion and export, SVG plots and the reproduction
//! table.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;
pub mod reproduce;

pub use config::RunConfig;
pub use error::{CliError, Result};
