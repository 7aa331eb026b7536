//! Push-based data delivery for shared-use scientific observatories.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithm of the
//! delivery framework: request and user classification, the hybrid
//! prefetching model with its Markov and uniform-mining baselines,
//! interval-aware DTN caches, virtual-group placement, real-time streaming,
//! and the discrete-event simulator that ties them together. File formats and
//! the command-line front end live in the `obsflow` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cache;
pub mod classifier;
pub mod error;
pub mod interval;
pub mod placement;
pub mod prediction;
pub mod sim;
pub mod streaming;
pub mod trace;

mod ids;

pub use error::{Error, Result};
pub use ids::{DtnId, ObjectId, UserId};
pub use interval::{Interval, IntervalSet};

/// Wall-clock seconds since the trace epoch.
pub type Timestamp = f64;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
