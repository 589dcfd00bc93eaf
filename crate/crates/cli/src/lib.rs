//! Command-line front end: flag and config-file parsing, the subcommands,
//! and their human, JSON and CSV renderings.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
