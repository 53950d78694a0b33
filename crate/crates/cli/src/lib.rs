//! Configuration, provenance and subcommands behind the `datgan` binary.

pub mod commands;
pub mod config;
pub mod provenance;

pub use config::{DataConfig, RunConfig, OUTPUT_ROOT_ENV};
pub use provenance::Provenance;
