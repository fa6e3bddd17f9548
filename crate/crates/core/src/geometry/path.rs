use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec2};

/// A robot's fixed path through the coordination region together with its
/// rectangular footprint.
///
/// The polyline starts at the entry of the region. Positions are measured by
/// the distance travelled by the robot's front; the path is extended linearly
/// before its first point and after its last one so that footprints are
/// defined while the robot is still entering or already leaving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct PathGeometry {
    polyline: Vec<Vec2>,
    robot_length: f64,
    robot_width: f64,
    /// Cumulative arc length at each polyline vertex.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPath {
    polyline: Vec<[f64; 2]>,
    robot_length: f64,
    robot_width: f64,
}

impl TryFrom<RawPath> for PathGeometry {
    type Error = GeometryError;
    fn try_from(raw: RawPath) -> Result<Self, Self::Error> {
        PathGeometry::new(
            raw.polyline.into_iter().map(Vec2::from).collect(),
            raw.robot_length,
            raw.robot_width,
        )
    }
}

impl From<PathGeometry> for RawPath {
    fn from(p: PathGeometry) -> Self {
        RawPath {
            polyline: p.polyline.iter().map(|v| [v.x, v.y]).collect(),
            robot_length: p.robot_length,
            robot_width: p.robot_width,
        }
    }
}

impl PathGeometry {
    pub fn new(
        polyline: Vec<Vec2>,
        robot_length: f64,
        robot_width: f64,
    ) -> Result<Self, GeometryError> {
        if polyline.len() < 2 {
            return Err(GeometryError::InvalidPath(
                "polyline needs at least two points".into(),
            ));
        }
        if !(robot_length > 0.0 && robot_width > 0.0) {
            return Err(GeometryError::InvalidPath(
                "robot length and width must be positive".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(polyline.len());
        cumulative.push(0.0);
        for w in polyline.windows(2) {
            let d = w[0].distance(w[1]);
            if !(d > 0.0) {
                return Err(GeometryError::InvalidPath(
                    "consecutive polyline points must be distinct".into(),
                ));
            }
            cumulative.push(cumulative.last().unwrap() + d);
        }
        let total = *cumulative.last().unwrap();
        if total < robot_length {
            return Err(GeometryError::InvalidPath(format!(
                "path length {total} is shorter than the robot ({robot_length})"
            )));
        }
        Ok(Self {
            polyline,
            robot_length,
            robot_width,
            cumulative,
        })
    }

    /// Straight path from `start` to `end`.
    pub fn straight(
        start: Vec2,
        end: Vec2,
        robot_length: f64,
        robot_width: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(vec![start, end], robot_length, robot_width)
    }

    pub fn polyline(&self) -> &[Vec2] {
        &self.polyline
    }

    pub fn robot_length(&self) -> f64 {
        self.robot_length
    }

    pub fn robot_width(&self) -> f64 {
        self.robot_width
    }

    pub fn arc_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Curvilinear position at which the robot's rear clears the end of the
    /// polyline.
    pub fn exit_abscissa(&self) -> f64 {
        self.arc_length() + self.robot_length
    }

    fn segment_index(&self, s: f64) -> usize {
        let last = self.polyline.len() - 2;
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        }
    }

    /// Point and unit tangent at curvilinear position `s`, extrapolating
    /// the first and last segments outside the polyline.
    pub fn point_and_heading(&self, s: f64) -> (Vec2, Vec2) {
        let i = self.segment_index(s);
        let a = self.polyline[i];
        let b = self.polyline[i + 1];
        let dir = (b - a).normalized();
        (a + dir * (s - self.cumulative[i]), dir)
    }

    /// Whether the stretch `[s0, s1]` of the path contains a polyline vertex
    /// where the direction changes.
    pub fn bends_within(&self, s0: f64, s1: f64) -> bool {
        self.segment_index(s0) != self.segment_index(s1)
    }
}

/// A rectangle of given heading in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    /// Unit vector along the rectangle's length.
    pub heading: Vec2,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    /// Corners in counter-clockwise order starting from rear-right.
    pub fn corners(&self) -> [Vec2; 4] {
        let l = self.heading * self.half_length;
        let w = self.heading.perp() * self.half_width;
        [
            self.center - l - w,
            self.center + l - w,
            self.center + l + w,
            self.center - l + w,
        ]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_length * self.half_width
    }

    pub fn circumradius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    fn projection(&self, axis: Vec2) -> (f64, f64) {
        let c = self.center.dot(axis);
        let r = self.half_length * self.heading.dot(axis).abs()
            + self.half_width * self.heading.perp().dot(axis).abs();
        (c - r, c + r)
    }

    /// Separating-axis test. Rectangles that merely touch do not intersect.
    pub fn intersects(&self, other: &OrientedRect) -> bool {
        let reach = self.circumradius() + other.circumradius();
        if self.center.distance(other.center) >= reach {
            return false;
        }
        let axes = [
            self.heading,
            self.heading.perp(),
            other.heading,
            other.heading.perp(),
        ];
        axes.iter().all(|&axis| {
            let (a0, a1) = self.projection(axis);
            let (b0, b1) = other.projection(axis);
            a1 > b0 && b1 > a0
        })
    }
}

/// Footprint of the robot when its front is at curvilinear position `s`.
///
/// The rectangle is centred on the path half a body length behind the front
/// and oriented along the segment under its centre. Valid for
/// `0 <= s <= arc_length + robot_length`.
pub fn arc_pose(path: &PathGeometry, s: f64) -> Result<OrientedRect, GeometryError> {
    let hi = path.exit_abscissa();
    if !(0.0..=hi).contains(&s) {
        return Err(GeometryError::OutOfRange { s, lo: 0.0, hi });
    }
    let half = 0.5 * path.robot_length;
    let (center, heading) = path.point_and_heading(s - half);
    Ok(OrientedRect {
        center,
        heading,
        half_length: half,
        half_width: 0.5 * path.robot_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec2, b: Vec2) -> bool {
        a.distance(b) < 1e-9
    }

    #[test]
    fn straight_footprint_corners() {
        let p = PathGeometry::straight(Vec2::new(0.0, 0.0), Vec2::new(20.0, 0.0), 5.0, 2.0)
            .unwrap();
        let r = arc_pose(&p, 7.0).unwrap();
        let c = r.corners();
        assert!(close(c[0], Vec2::new(2.0, -1.0)));
        assert!(close(c[1], Vec2::new(7.0, -1.0)));
        assert!(close(c[2], Vec2::new(7.0, 1.0)));
        assert!(close(c[3], Vec2::new(2.0, 1.0)));
    }

    #[test]
    fn entry_footprint_leading_edge_at_origin() {
        let p = PathGeometry::new(
            vec![Vec2::new(3.0, 4.0), Vec2::new(3.0, 20.0), Vec2::new(10.0, 20.0)],
            5.0,
            2.0,
        )
        .unwrap();
        let r = arc_pose(&p, 0.0).unwrap();
        let c = r.corners();
        // front corners are centred on the path origin
        let front_mid = (c[1] + c[2]) * 0.5;
        assert!(close(front_mid, Vec2::new(3.0, 4.0)));
    }

    #[test]
    fn corner_footprint_keeps_area() {
        let p = PathGeometry::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)],
            5.0,
            2.0,
        )
        .unwrap();
        let r = arc_pose(&p, 10.0).unwrap();
        let c = r.corners();
        let shoelace: f64 = (0..4).map(|k| c[k].cross(c[(k + 1) % 4])).sum::<f64>() * 0.5;
        assert!((shoelace - 10.0).abs() < 1e-9);
        // the body touches the second leg's start
        let leg2 = PathGeometry::new(vec![Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)], 0.5, 0.5)
            .unwrap();
        let probe = arc_pose(&leg2, 0.5).unwrap();
        assert!(r.intersects(&probe));
    }

    #[test]
    fn out_of_range_is_rejected() {
        let p = PathGeometry::straight(Vec2::new(0.0, 0.0), Vec2::new(20.0, 0.0), 5.0, 2.0)
            .unwrap();
        assert!(arc_pose(&p, -0.1).is_err());
        assert!(arc_pose(&p, 25.0).is_ok());
        assert!(arc_pose(&p, 25.1).is_err());
    }

    #[test]
    fn invalid_paths() {
        assert!(PathGeometry::new(vec![Vec2::new(0.0, 0.0)], 5.0, 2.0).is_err());
        assert!(PathGeometry::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0)], 5.0, 2.0).is_err());
        assert!(PathGeometry::straight(Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0), 5.0, 2.0).is_err());
        assert!(PathGeometry::straight(Vec2::new(0.0, 0.0), Vec2::new(9.0, 0.0), 5.0, 0.0).is_err());
    }

    #[test]
    fn touching_rectangles_do_not_intersect() {
        let a = OrientedRect {
            center: Vec2::new(0.0, 0.0),
            heading: Vec2::new(1.0, 0.0),
            half_length: 1.0,
            half_width: 1.0,
        };
        let b = OrientedRect {
            center: Vec2::new(2.0, 0.0),
            ..a
        };
        assert!(!a.intersects(&b));
        let c = OrientedRect {
            center: Vec2::new(1.9, 0.5),
            ..a
        };
        assert!(a.intersects(&c));
    }
}
