use serde::{Deserialize, Serialize};

use super::{
    bounding_polygon, compute_collision_set, split_components, CollisionPolygon, GeometryError,
    RobotId, RobotSpec,
};

const EPS: f64 = 1e-9;

/// Gap kept between the front of a follower and the rear of its leader.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FollowingDistance(f64);

impl FollowingDistance {
    pub fn new(d_par: f64) -> Result<Self, GeometryError> {
        if d_par.is_finite() && d_par >= 0.0 {
            Ok(Self(d_par))
        } else {
            Err(GeometryError::InvalidFollowingDistance(d_par))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for FollowingDistance {
    fn default() -> Self {
        Self(2.0)
    }
}

impl TryFrom<f64> for FollowingDistance {
    type Error = GeometryError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<FollowingDistance> for f64 {
    fn from(d: FollowingDistance) -> f64 {
        d.0
    }
}

/// Which robot of a polygon's `(s_i, s_j)` pair holds priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    IOverJ,
    JOverI,
}

/// Shape of a conflict. Informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    Following,
    Crossing,
    Merging,
    Diverging,
    MergeDiverge,
}

/// Exclusion parameters for one priority direction: `robot_i` passes first.
///
/// When `robot_i` has not reached `s_perp_hi_i`, `robot_j` must stay at or
/// below `s_perp_lo_j`. When `robot_j` is past `s_par_lo_j` and `robot_i`
/// has not reached `s_par_hi_i`, they must satisfy
/// `s_i - s_j >= offset_aij`. An empty part has all four bounds at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictZone {
    pub robot_i: RobotId,
    pub robot_j: RobotId,
    /// Bounding polygon in `(s_i, s_j)` coordinates, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<CollisionPolygon>,
    #[serde(default)]
    pub s_par_lo_i: f64,
    #[serde(default)]
    pub s_par_hi_i: f64,
    #[serde(default)]
    pub s_par_lo_j: f64,
    #[serde(default)]
    pub s_par_hi_j: f64,
    #[serde(default)]
    pub s_perp_lo_i: f64,
    #[serde(default)]
    pub s_perp_hi_i: f64,
    #[serde(default)]
    pub s_perp_lo_j: f64,
    #[serde(default)]
    pub s_perp_hi_j: f64,
    #[serde(default)]
    pub offset_aij: f64,
    pub conflict_kind: ConflictKind,
}

impl ConflictZone {
    pub fn has_par(&self) -> bool {
        [self.s_par_lo_i, self.s_par_hi_i, self.s_par_lo_j, self.s_par_hi_j]
            .iter()
            .any(|v| *v != 0.0)
    }

    pub fn has_perp(&self) -> bool {
        [self.s_perp_lo_i, self.s_perp_hi_i, self.s_perp_lo_j, self.s_perp_hi_j]
            .iter()
            .any(|v| *v != 0.0)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |reason: String| {
            Err(GeometryError::InvalidZone {
                robot_i: self.robot_i,
                robot_j: self.robot_j,
                reason,
            })
        };
        if self.robot_i == self.robot_j {
            return bad("a zone needs two distinct robots".into());
        }
        let named = [
            ("s_par_lo_i", self.s_par_lo_i),
            ("s_par_hi_i", self.s_par_hi_i),
            ("s_par_lo_j", self.s_par_lo_j),
            ("s_par_hi_j", self.s_par_hi_j),
            ("s_perp_lo_i", self.s_perp_lo_i),
            ("s_perp_hi_i", self.s_perp_hi_i),
            ("s_perp_lo_j", self.s_perp_lo_j),
            ("s_perp_hi_j", self.s_perp_hi_j),
            ("offset_aij", self.offset_aij),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return bad(format!("{name} is not finite"));
            }
            if name != "offset_aij" && v < 0.0 {
                return bad(format!("{name} = {v} is negative"));
            }
        }
        if !self.has_par() && !self.has_perp() {
            return bad("both parts are empty".into());
        }
        if self.has_par() && (self.s_par_lo_i > self.s_par_hi_i || self.s_par_lo_j > self.s_par_hi_j) {
            return bad("parallel bounds are not ordered".into());
        }
        if self.has_perp()
            && (self.s_perp_lo_i > self.s_perp_hi_i || self.s_perp_lo_j > self.s_perp_hi_j)
        {
            return bad("perpendicular bounds are not ordered".into());
        }
        if let Some(p) = &self.polygon {
            p.validate()?;
        }
        Ok(())
    }

    /// Whether `(s_i, s_j)` breaks one of the two exclusion conditions.
    pub fn violates(&self, s_i: f64, s_j: f64, tol: f64) -> bool {
        let perp = self.has_perp() && s_i < self.s_perp_hi_i - tol && s_j > self.s_perp_lo_j + tol;
        let par = self.has_par()
            && s_j > self.s_par_lo_j + tol
            && s_i < self.s_par_hi_i - tol
            && s_i - s_j < self.offset_aij - tol;
        perp || par
    }
}

/// Splits the completed set of `polygon` (priority to the first coordinate
/// unless `direction` says otherwise) into its diagonal-edged and
/// horizontal-edged parts.
pub fn decompose(
    polygon: &CollisionPolygon,
    d_par: FollowingDistance,
    direction: Direction,
    ids: (RobotId, RobotId),
) -> Result<ConflictZone, GeometryError> {
    polygon.validate()?;
    let (poly, robot_i, robot_j) = match direction {
        Direction::IOverJ => (polygon.clone(), ids.0, ids.1),
        Direction::JOverI => (polygon.transpose(), ids.1, ids.0),
    };
    let b = poly.bounds();
    let h = b.b_lo;
    let top = b.b_hi;
    let left = b.a_lo;
    let x2 = b.a_hi;
    // bottom edge meets the lower diagonal here
    let x1 = (h - b.d_lo).min(x2);
    let reaches_exit = poly.domain.is_none_or(|(ai, _)| x2 >= ai - EPS);

    let mut zone = ConflictZone {
        robot_i,
        robot_j,
        polygon: Some(poly),
        s_par_lo_i: 0.0,
        s_par_hi_i: 0.0,
        s_par_lo_j: 0.0,
        s_par_hi_j: 0.0,
        s_perp_lo_i: 0.0,
        s_perp_hi_i: 0.0,
        s_perp_lo_j: 0.0,
        s_perp_hi_j: 0.0,
        offset_aij: 0.0,
        conflict_kind: ConflictKind::Crossing,
    };
    let diagonal = x2 - x1 > EPS;
    if diagonal {
        zone.s_par_lo_i = x1;
        zone.s_par_hi_i = x2;
        zone.s_par_lo_j = h;
        zone.s_par_hi_j = top;
        if h > EPS {
            zone.s_perp_lo_i = left;
            zone.s_perp_hi_i = x1;
            zone.s_perp_lo_j = h;
            zone.s_perp_hi_j = top;
            zone.conflict_kind = if reaches_exit {
                ConflictKind::Merging
            } else {
                ConflictKind::MergeDiverge
            };
        } else {
            zone.conflict_kind = if reaches_exit {
                ConflictKind::Following
            } else {
                ConflictKind::Diverging
            };
        }
        zone.offset_aij = d_par.get() + zone.s_par_lo_i - zone.s_perp_lo_j;
    } else {
        zone.s_perp_lo_i = left;
        zone.s_perp_hi_i = x2;
        zone.s_perp_lo_j = h;
        zone.s_perp_hi_j = top;
    }
    Ok(zone)
}

/// One connected conflict between two robots with parameters for both
/// priority directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub id: usize,
    /// Parameters when the first robot passes first.
    pub forward: ConflictZone,
    /// Parameters when the second robot passes first.
    pub backward: ConflictZone,
}

impl Conflict {
    pub fn from_polygon(
        id: usize,
        ids: (RobotId, RobotId),
        polygon: &CollisionPolygon,
        d_par: FollowingDistance,
    ) -> Result<Self, GeometryError> {
        Ok(Conflict {
            id,
            forward: decompose(polygon, d_par, Direction::IOverJ, ids)?,
            backward: decompose(polygon, d_par, Direction::JOverI, ids)?,
        })
    }

    pub fn first(&self) -> RobotId {
        self.forward.robot_i
    }

    pub fn second(&self) -> RobotId {
        self.forward.robot_j
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.forward.validate()?;
        self.backward.validate()?;
        if self.forward.robot_i != self.backward.robot_j || self.forward.robot_j != self.backward.robot_i {
            return Err(GeometryError::InvalidZone {
                robot_i: self.forward.robot_i,
                robot_j: self.forward.robot_j,
                reason: "the two directions must swap the robots".into(),
            });
        }
        Ok(())
    }

    /// Zone parameters when `leader` passes first.
    pub fn zone_for(&self, leader: RobotId) -> Option<&ConflictZone> {
        if leader == self.forward.robot_i {
            Some(&self.forward)
        } else if leader == self.backward.robot_i {
            Some(&self.backward)
        } else {
            None
        }
    }
}

/// All conflicts between two geometric robots, one per connected component
/// of their sampled collision set. Ids start at `first_id`.
pub fn conflicts_between(
    spec_i: &RobotSpec,
    spec_j: &RobotSpec,
    resolution: f64,
    d_par: FollowingDistance,
    first_id: usize,
) -> Result<Vec<Conflict>, GeometryError> {
    let samples = compute_collision_set(spec_i, spec_j, resolution)?;
    split_components(&samples)
        .iter()
        .enumerate()
        .map(|(k, comp)| {
            let poly = bounding_polygon(comp)?;
            Conflict::from_polygon(first_id + k, (spec_i.id, spec_j.id), &poly, d_par)
        })
        .collect()
}
