//! Command-line front end: configuration, model files and the commands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod input;
pub mod model_file;

pub use cli::{run, Cli};
pub use error::{CliError, Result};
