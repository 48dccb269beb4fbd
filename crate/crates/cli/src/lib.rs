//! Command line harness for `oops-core`: run configuration files, the text
//! formats for stores and reports, and one function per subcommand.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use config::RunConfig;
pub use error::{CliError, Outcome};
