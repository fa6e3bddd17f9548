use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::geometry::{GeometryError, PathGeometry, Vec2};

/// Side of the intersection a vehicle comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Approach {
    South,
    East,
    North,
    West,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Turn {
    Left,
    Straight,
    Right,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::South, Approach::East, Approach::North, Approach::West];

    /// Rotation taking the south approach onto this one.
    fn angle(self) -> f64 {
        match self {
            Approach::South => 0.0,
            Approach::East => FRAC_PI_2,
            Approach::North => 2.0 * FRAC_PI_2,
            Approach::West => 3.0 * FRAC_PI_2,
        }
    }

    fn letter(self) -> char {
        match self {
            Approach::South => 'S',
            Approach::East => 'E',
            Approach::North => 'N',
            Approach::West => 'W',
        }
    }

    fn from_letter(c: char) -> Option<Approach> {
        Approach::ALL.into_iter().find(|a| a.letter() == c)
    }

    /// Side a vehicle from this approach leaves by after `turn`.
    pub fn exit(self, turn: Turn) -> Approach {
        let k = Approach::ALL.iter().position(|&a| a == self).unwrap();
        let shift = match turn {
            Turn::Right => 1,
            Turn::Straight => 2,
            Turn::Left => 3,
        };
        Approach::ALL[(k + shift) % 4]
    }
}

/// Entry side and turn, written like `S-W` (from south, leaving west).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Route {
    pub from: Approach,
    pub turn: Turn,
}

impl Route {
    pub fn all() -> Vec<Route> {
        Approach::ALL
            .into_iter()
            .flat_map(|from| {
                [Turn::Left, Turn::Straight, Turn::Right]
                    .into_iter()
                    .map(move |turn| Route { from, turn })
            })
            .collect()
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.from.letter(), self.from.exit(self.turn).letter())
    }
}

impl FromStr for Route {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("'{s}' is not a route like S-W");
        let mut chars = s.chars();
        let (a, dash, b) = (chars.next(), chars.next(), chars.next());
        if dash != Some('-') || chars.next().is_some() {
            return Err(bad());
        }
        let from = a.and_then(Approach::from_letter).ok_or_else(bad)?;
        let to = b.and_then(Approach::from_letter).ok_or_else(bad)?;
        [Turn::Left, Turn::Straight, Turn::Right]
            .into_iter()
            .find(|&t| from.exit(t) == to)
            .map(|turn| Route { from, turn })
            .ok_or_else(|| format!("'{s}' is a U-turn"))
    }
}

/// Four-way intersection with one lane per direction and right-hand
/// traffic. The coordination region is the square of half-width
/// `region_half` centred on the crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionTemplate {
    pub lane_width: f64,
    pub right_radius: f64,
    pub left_radius: f64,
    pub region_half: f64,
    pub arc_segments: usize,
    pub robot_length: f64,
    pub robot_width: f64,
}

impl Default for IntersectionTemplate {
    fn default() -> Self {
        IntersectionTemplate {
            lane_width: 3.5,
            right_radius: 8.0,
            left_radius: 12.0,
            region_half: 30.0,
            arc_segments: 16,
            robot_length: 5.0,
            robot_width: 2.0,
        }
    }
}

impl IntersectionTemplate {
    /// Centre line of `route` from region entry to region exit.
    pub fn polyline(&self, route: Route) -> Vec<Vec2> {
        let h = 0.5 * self.lane_width;
        let r = self.region_half;
        // built for the south approach (heading +y), then rotated
        let pts: Vec<Vec2> = match route.turn {
            Turn::Straight => vec![Vec2::new(h, -r), Vec2::new(h, r)],
            Turn::Right => {
                let rad = self.right_radius;
                let c = Vec2::new(h + rad, -h - rad);
                let mut pts = vec![Vec2::new(h, -r)];
                // clockwise from angle pi to pi/2
                pts.extend((0..=self.arc_segments).map(|k| {
                    let th = 2.0 * FRAC_PI_2 - FRAC_PI_2 * k as f64 / self.arc_segments as f64;
                    c + Vec2::new(rad * th.cos(), rad * th.sin())
                }));
                pts.push(Vec2::new(r, -h));
                pts
            }
            Turn::Left => {
                let rad = self.left_radius;
                let c = Vec2::new(h - rad, h - rad);
                let mut pts = vec![Vec2::new(h, -r)];
                // counter-clockwise from angle 0 to pi/2
                pts.extend((0..=self.arc_segments).map(|k| {
                    let th = FRAC_PI_2 * k as f64 / self.arc_segments as f64;
                    c + Vec2::new(rad * th.cos(), rad * th.sin())
                }));
                pts.push(Vec2::new(-r, h));
                pts
            }
        };
        let angle = route.from.angle();
        pts.into_iter()
            .map(|p| {
                let q = p.rotated(angle);
                // snap rotation noise so files stay readable
                Vec2::new(snap(q.x), snap(q.y))
            })
            .collect()
    }

    pub fn path(&self, route: Route) -> Result<PathGeometry, GeometryError> {
        PathGeometry::new(self.polyline(route), self.robot_length, self.robot_width)
    }
}

fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}
