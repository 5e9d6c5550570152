//! File formats, HTTP backends, the mock server and the command-line front
//! end around `toxprompt-core`.

pub mod cache;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod http;
pub mod prompts;
pub mod report;
pub mod runner;
pub mod server;
pub mod wire;

pub use error::{CliError, ExitCode, LoadError};
