use alloc::string::String;

use crate::{DtnId, ObjectId, UserId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid workload spec: {0}")]
    InvalidWorkload(String),
    #[error("traffic scale factor must be positive, got {0}")]
    InvalidScale(f64),
    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("series contains non-finite values")]
    NonFiniteSeries,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("records belong to different streams: ({0}, {1}) vs ({2}, {3})")]
    MismatchedStream(UserId, ObjectId, UserId, ObjectId),
    #[error("segment of {size} bytes exceeds cache capacity {capacity}")]
    SegmentTooLarge { size: u64, capacity: u64 },
    #[error("no candidate DTNs for hub selection")]
    NoCandidates,
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("no path between {0} and {1}")]
    Disconnected(DtnId, DtnId),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
}
