//! Deterministic multi-robot navigation around pedestrians.
//!
//! A fleet of robots plans probabilistically-safe, time-stamped grid
//! trajectories around simulated humans by combining three ingredients:
//!
//! - confidence-aware intent prediction ([`prediction`]): a Bayesian
//!   posterior over each human's goal and model confidence drives
//!   time-indexed occupancy forecasts that flatten on their own when
//!   behavior departs from the model;
//! - error-bound-aware planning ([`planning`]): a time-varying A* rejects
//!   states whose tracking-error-bound footprint overlaps static obstacles,
//!   higher-priority robot tubes, or too much predicted human mass;
//! - priority-ordered coordination ([`coordination`]): robots plan
//!   sequentially, each avoiding the tubes already published this round.
//!
//! [`tracking`] closes the loop with a disturbance-robust reference tracker
//! and empirical validation of the error bound; [`scenario`] holds the JSON
//! run configuration; [`oracle`] carries brute-force reference searches used
//! for validation.

pub mod coordination;
pub mod geometry;
pub mod oracle;
pub mod planning;
pub mod prediction;
pub mod rng;
pub mod scenario;
pub mod tracking;
pub mod types;

pub use geometry::{Aabb, Vec2};
pub use types::{
    teb_box_at, Cell, GridSpec, KeepOutSpec, OccupancyGrid, PlanarState, PredictionStack,
    RobotPhysicalState, TrackingErrorBound, Trajectory,
};
