//! Command-line tools, HTTP service and external-reranker bridge for the
//! `toposieve` toponym resolver.

pub mod args;
pub mod bridge;
pub mod commands;
pub mod error;
pub mod lgl;
pub mod predict;
pub mod serve;

pub use error::{CliError, CliResult, ErrorKind};
