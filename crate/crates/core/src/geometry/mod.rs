//! Paths, footprints, sampled collision sets and their decomposition into
//! the bounds consumed by the model.

mod collision;
mod path;
mod polygon;
mod robot;
mod vec2;
mod zone;

pub use collision::{compute_collision_set, split_components, CollisionSamples};
pub use path::{arc_pose, OrientedRect, PathGeometry};
pub use polygon::{bounding_polygon, CollisionPolygon, DirectionalBounds};
pub use robot::{AbstractPath, RobotId, RobotPath, RobotSpec};
pub use vec2::Vec2;
pub use zone::{
    conflicts_between, decompose, Conflict, ConflictKind, ConflictZone, Direction,
    FollowingDistance,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("abscissa {s} outside [{lo}, {hi}]")]
    OutOfRange { s: f64, lo: f64, hi: f64 },
    #[error("robot {0} has an abstract path; collision sets need geometry")]
    AbstractPath(RobotId),
    #[error("empty collision sample set")]
    EmptySamples,
    #[error("invalid collision polygon: {0}")]
    InvalidPolygon(String),
    #[error("sampling resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("robot {id}: invalid {field}: {reason}")]
    InvalidRobot {
        id: RobotId,
        field: &'static str,
        reason: String,
    },
    #[error("following distance must be nonnegative, got {0}")]
    InvalidFollowingDistance(f64),
    #[error("conflict zone {robot_i}/{robot_j}: {reason}")]
    InvalidZone {
        robot_i: RobotId,
        robot_j: RobotId,
        reason: String,
    },
}
