//! Scenario files, command implementations and report serialization for the
//! `qotto` binary.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

pub use error::{CliError, Result};
