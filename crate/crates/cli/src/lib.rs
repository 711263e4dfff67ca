//! Batch pipeline for the unit-conversion benchmark: generation, rendering,
//! grading, metrics and voting, plus word-problem composition and the
//! calculator.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use app::run;
pub use config::RunConfig;
pub use error::CliError;
