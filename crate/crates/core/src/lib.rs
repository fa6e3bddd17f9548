//! Time-optimal coordination of robots travelling along fixed paths.
//!
//! The crate turns robot paths into pairwise conflict zones, formulates a
//! time-discretized mixed-integer program over those zones, solves it with
//! a built-in branch and bound, and turns the solution into verified
//! trajectories.

pub mod geometry;
pub mod milp;
pub mod model;
pub mod trajectory;
pub mod scenario;
pub mod pipeline;
