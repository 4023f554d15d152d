//! Multi-frame point-constrained navigation in dynamic 2D worlds.
//!
//! The crate is organised along the data flow of one control cycle:
//!
//! - [`world`], [`lidar`], [`scenario`]: seeded simulator and scenario files.
//! - [`perception`]: scan preprocessing, DBSCAN, tracking and velocity
//!   smoothing over a ten-frame buffer.
//! - [`prediction`]: Gaussian-mixture scattered virtual points ahead of
//!   moving tracks.
//! - [`planner`]: receding-horizon optimisation against scan and virtual
//!   points.
//! - [`dwa`]: a dynamic-window baseline.
//! - [`harness`]: closed-loop trials, ablations, reports and latency.
//!
//! Data-parallel loops go through [`exec::Execution`]; the `parallel`
//! feature (default) backs them with rayon.

pub mod dwa;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod lidar;
pub mod perception;
pub mod planner;
pub mod prediction;
pub mod scenario;
pub mod world;

pub use exec::Execution;
pub use geometry::{Pose2D, Vec2};
pub use scenario::{load_scenario, Scenario};
pub use world::{ControlCommand, RobotState, WorldState};
