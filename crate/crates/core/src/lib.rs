//! Coverage planning for mixed static/mobile sensor networks on unit grids.
//!
//! Static nodes are placed by a boundary-weighted coverage MILP, mobile node
//! paths by either a coverage-maximizing or a movement-minimizing MILP, all
//! solved exactly by the embedded branch-and-bound. Greedy and random
//! movement baselines and an experiment harness sit on top.

pub mod bnb;
pub mod formulations;
pub mod grid;
pub mod harness;
pub mod milp;
pub mod par;
pub mod planners;
pub mod simplex;

pub use bnb::{solve_milp, solve_milp_from, MilpResult, MilpStatus, SolveParams};
pub use grid::{Cell, CellSet, CoverageRatio, CoverageReport, GridSpec, SensorParams};
pub use milp::{Assignment, InstanceStats, MilpInstance};
