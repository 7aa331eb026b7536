//! File formats, experiment configuration, sweeps and reports for
//! [`obsflow_core`], plus the `obsflow` command-line tool.

pub mod config;
pub mod export;
pub mod report;
pub mod sweep;
pub mod tracefile;
pub mod units;

mod error;

pub use error::Error;
pub use obsflow_core as core;
