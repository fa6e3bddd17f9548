use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GeometryError, PathGeometry};

/// Identifier of a robot within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RobotId(pub u32);

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Path known only by its length; conflicts with other robots are supplied
/// explicitly instead of being derived from geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstractPath {
    pub s_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobotPath {
    Geometric(PathGeometry),
    Abstract(AbstractPath),
}

/// One robot: its path, entry and exit conditions, and kinodynamic limits.
///
/// Positions are curvilinear abscissae of the robot's front, zero at the
/// entry of the coordination region and `s_out` once the robot has fully
/// left it.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    pub id: RobotId,
    pub path: RobotPath,
    pub s_out: f64,
    /// Time at which the robot's front crosses the region entry.
    pub t_in: f64,
    pub v_in: f64,
    pub v_out: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Known position at `t_in` when the robot is already inside the region.
    /// When set, `(s_init, v_in)` is the state at `t_in` instead of the entry
    /// state `(0, v_in)`.
    pub s_init: Option<f64>,
}

impl RobotSpec {
    /// Checks the scalar invariants. Returns the offending field name on
    /// failure.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |field: &'static str, why: String| GeometryError::InvalidRobot {
            id: self.id,
            field,
            reason: why,
        };
        let finite = [
            ("s_out", self.s_out),
            ("t_in", self.t_in),
            ("v_in", self.v_in),
            ("v_out", self.v_out),
            ("v_max", self.v_max),
            ("a_min", self.a_min),
            ("a_max", self.a_max),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(bad(name, format!("{value} is not finite")));
            }
        }
        if self.s_out <= 0.0 {
            return Err(bad("s_out", format!("{} must be positive", self.s_out)));
        }
        if self.t_in < 0.0 {
            return Err(bad("t_in", format!("{} must be nonnegative", self.t_in)));
        }
        if self.v_max <= 0.0 {
            return Err(bad("v_max", format!("{} must be positive", self.v_max)));
        }
        if !(0.0..=self.v_max).contains(&self.v_in) {
            return Err(bad("v_in", format!("{} outside [0, v_max]", self.v_in)));
        }
        if !(0.0..=self.v_max).contains(&self.v_out) {
            return Err(bad("v_out", format!("{} outside [0, v_max]", self.v_out)));
        }
        if self.a_min >= 0.0 {
            return Err(bad("a_min", format!("{} must be negative", self.a_min)));
        }
        if self.a_max <= 0.0 {
            return Err(bad("a_max", format!("{} must be positive", self.a_max)));
        }
        if let Some(s0) = self.s_init {
            if !(0.0..self.s_out).contains(&s0) {
                return Err(bad("s_init", format!("{s0} outside [0, s_out)")));
            }
        }
        if let RobotPath::Abstract(p) = &self.path {
            if p.s_out <= 0.0 {
                return Err(bad("path.s_out", format!("{} must be positive", p.s_out)));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Option<&PathGeometry> {
        match &self.path {
            RobotPath::Geometric(g) => Some(g),
            RobotPath::Abstract(_) => None,
        }
    }

    /// Position at `t_in` (the first time step of the model).
    pub fn initial_position(&self) -> f64 {
        self.s_init.unwrap_or(0.0)
    }
}
