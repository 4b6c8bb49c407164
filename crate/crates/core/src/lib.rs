//! Black-white array: an ordered multiset kept in two flat arrays.
//!
//! ```
//! use bwa::{BlackWhiteArray, GrowthPolicy};
//!
//! let mut a = BlackWhiteArray::new(4, GrowthPolicy::Grow).unwrap();
//! for v in [83, 67, 59, 21, 76, 33, 45, 52] {
//!     a.insert(v).unwrap();
//! }
//! assert!(a.contains(&59));
//! assert_eq!(a.iter_sorted().copied().collect::<Vec<_>>(), [21, 33, 45, 52, 59, 67, 76, 83]);
//! assert_eq!(a.dump(), "rank=3 [21,33,45,52,59,67,76,83]\n");
//! ```
//!
//! The `parallel` feature (on by default) runs batch queries and multi-seed
//! verification on rayon. Timed benchmark regions are always single-threaded.

pub mod array;
pub mod bench;
pub mod cli;
mod error;
pub mod oracle;

pub use array::{
    BlackWhiteArray, BoundSide, Counters, DemoteTarget, Demotion, GrowthPolicy, SearchResult,
    SegmentRef, Side, Slot, SortedIter, Stats, Violation,
};
pub use error::BwaError;
