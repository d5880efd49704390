//! Subcommand specs and runners behind the `balance` binary.

pub mod commands;
mod error;
pub mod output;
pub mod resolve;
pub mod serve;

pub use commands::{execute, Command, Outcome, Target};
pub use error::CliError;
pub use output::{Format, Manifest, Table};
pub use resolve::{resolve, Spec};
