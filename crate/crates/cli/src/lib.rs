//! Command-line harness: evaluation reports, replays, human play sessions
//! and throughput benchmarks on top of `c2sim-core`.

pub mod bench;
pub mod cli;
pub mod replay;
pub mod report;
pub mod session;
pub mod stats;
pub mod ui;

pub use cli::{run_cli, CliError};
