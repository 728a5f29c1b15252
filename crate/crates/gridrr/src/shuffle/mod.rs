//! Line shuffle engines. Each takes cell lists and target positions and
//! returns a collision-free [`Fragment`](crate::exec::Fragment).

pub mod convert;
pub mod highway;
pub mod merge;
pub mod oddeven;

pub use convert::follow_paths;
pub use highway::{highway_shuffle, Highway};
pub use merge::{linear_merge_shuffle, merge_bound};
pub use oddeven::{odd_even_shuffle, ShuffleMode};
