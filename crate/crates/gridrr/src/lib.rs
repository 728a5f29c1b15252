//! Grid rearrangement solvers for labelled multi-robot path planning on
//! 4-connected 2D and 6-connected 3D grids.
//!
//! Plans are built from three rounds of simulated row/column shuffles of an
//! abstract table, realized by density-specific shuffle engines, with
//! optional max-flow balancing phases, matching heuristics and
//! order-preserving path refinement.

pub mod bench;
pub mod blocks;
pub mod error;
pub mod exec;
mod flow;
pub mod grid;
pub mod matching;
pub mod pipeline2d;
pub mod pipeline3d;
pub mod refine;
pub mod scenario;
pub mod shuffle;
pub mod unlabeled;
pub mod validate;

pub use error::{Error, Result};
pub use grid::{Cell, GridSpace, Instance, Plan, RobotId};
pub use validate::{compute_metrics, makespan_lower_bound, strip_virtual, validate_plan, Metrics, ValidationReport};

/// Integer cost used by assignment heuristics.
pub type Cost = matching::LbaCost;
/// Makespan over lower bound.
pub type Ratio = validate::OptimalityRatio;
