use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BwaError {
    #[error("capacity exponent must be at least 1")]
    ZeroCapacity,
    #[error("array of capacity 2^{cap_exp} is full")]
    CapacityExceeded { cap_exp: usize },
    #[error("rank {rank} out of range for capacity exponent {cap_exp}")]
    RankOutOfRange { rank: usize, cap_exp: usize },
    #[error("index {index} outside 1..{capacity}")]
    IndexOutOfRange { index: usize, capacity: usize },
    #[error("interval lower end exceeds upper end")]
    InvalidInterval,
    #[error("failed to allocate {slots} slots")]
    Alloc { slots: usize },
}
