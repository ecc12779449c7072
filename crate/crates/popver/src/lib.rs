//! File formats and the command-line front end of `popver`.
//!
//! The engine lives in `popver-core`; this crate reads and writes protocol
//! files, value tables, traces and DOT graphs, and wires them to the
//! `popver` binary.

pub mod cli;
pub mod error;
pub mod export;
pub mod format;
pub mod table;

pub use error::CliError;
pub use format::{parse_protocol, protocol_to_json};
pub use table::{format_table, parse_table};
