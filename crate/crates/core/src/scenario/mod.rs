//! Scenario files, the intersection template and random scenario
//! generation.

mod generate;
mod template;

pub use generate::{gen_abstract, gen_fixed_count, gen_scenario, ArrivalModel};
pub use template::{Approach, IntersectionTemplate, Route, Turn};

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use crate::geometry::{
    conflicts_between, AbstractPath, CollisionPolygon, Conflict, DirectionalBounds,
    FollowingDistance, GeometryError, PathGeometry, RobotId, RobotPath, RobotSpec, Vec2,
};

pub const DEFAULT_TAU: f64 = 0.25;
pub const DEFAULT_HORIZON: f64 = 30.0;
pub const DEFAULT_RESOLUTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}: {path}: {reason}")]
    Invalid {
        line: usize,
        path: String,
        reason: String,
    },
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Robots carry polylines; conflicts come from sampled footprints.
    Geometric,
    /// Robots carry only a path length; conflicts are listed explicitly.
    Abstract,
}

fn default_v() -> f64 {
    15.0
}
fn default_a_min() -> f64 {
    -3.0
}
fn default_a_max() -> f64 {
    4.0
}
fn default_length() -> f64 {
    5.0
}
fn default_width() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRobot {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<String>,
    #[serde(default)]
    pub t_in: f64,
    pub v_in: f64,
    #[serde(default = "default_v")]
    pub v_out: f64,
    #[serde(default = "default_v")]
    pub v_max: f64,
    #[serde(default = "default_a_min")]
    pub a_min: f64,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_init: Option<f64>,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polyline: Option<Vec<[f64; 2]>>,
}

/// Collision region between two robots in abstract mode, given either by
/// its support values or by its vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawZone {
    pub robots: [u32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    mode: Mode,
    tau: Option<f64>,
    horizon: Option<f64>,
    d_par: Option<f64>,
    resolution: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    robots: Vec<Spanned<RawRobot>>,
    #[serde(default)]
    zones: Vec<Spanned<RawZone>>,
}

#[derive(Debug, Serialize)]
struct FileOut<'a> {
    mode: Mode,
    tau: f64,
    horizon: f64,
    d_par: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolution: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    robots: &'a [RawRobot],
    #[serde(skip_serializing_if = "<[RawZone]>::is_empty")]
    zones: &'a [RawZone],
}

/// A validated coordination problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub tau: f64,
    pub horizon: f64,
    pub d_par: FollowingDistance,
    pub resolution: f64,
    pub seed: Option<u64>,
    pub robots: Vec<RobotSpec>,
    pub conflicts: Vec<Conflict>,
    raw_robots: Vec<RawRobot>,
    raw_zones: Vec<RawZone>,
}

fn line_of(text: &str, span: &Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

/// Moves an element-level error to the line of the offending key when
/// that key is written inside the element.
fn refine_line(err: ScenarioError, text: &str, robots: &[Range<usize>], zones: &[Range<usize>]) -> ScenarioError {
    let ScenarioError::Invalid { line, path, reason } = err else {
        return err;
    };
    let located = (|| {
        let (head, field) = path.split_once('.')?;
        let (list, idx) = head.split_once('[')?;
        let idx: usize = idx.trim_end_matches(']').parse().ok()?;
        let span = match list {
            "robots" => robots.get(idx)?,
            "zones" => zones.get(idx)?,
            _ => return None,
        };
        // the span covers the table header; keys follow until the next one
        let body = text.get(span.start..)?;
        let mut offset = span.start;
        for (n, l) in body.split_inclusive('\n').enumerate() {
            let key = l.trim_start();
            let header = key.starts_with("[[")
                || (key.starts_with('[') && key[1..].starts_with(|c: char| c.is_ascii_alphabetic()));
            if n > 0 && header {
                break;
            }
            if key.strip_prefix(field).is_some_and(|rest| rest.trim_start().starts_with('=')) {
                return Some(line_of(text, &(offset..offset)));
            }
            offset += l.len();
        }
        None
    })();
    ScenarioError::Invalid {
        line: located.unwrap_or(line),
        path,
        reason,
    }
}

impl Scenario {
    /// Parses and validates a scenario file.
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let file: FileIn = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        let robot_spans: Vec<Range<usize>> = file.robots.iter().map(|r| r.span()).collect();
        let zone_spans: Vec<Range<usize>> = file.zones.iter().map(|z| z.span()).collect();
        let robot_lines: Vec<usize> = robot_spans.iter().map(|s| line_of(text, s)).collect();
        let zone_lines: Vec<usize> = zone_spans.iter().map(|s| line_of(text, s)).collect();
        let robots: Vec<RawRobot> = file.robots.into_iter().map(|r| r.into_inner()).collect();
        let zones: Vec<RawZone> = file.zones.into_iter().map(|z| z.into_inner()).collect();
        Self::assemble(
            file.mode,
            Settings {
                tau: file.tau,
                horizon: file.horizon,
                d_par: file.d_par,
                resolution: file.resolution,
                seed: file.seed,
            },
            robots,
            zones,
            &robot_lines,
            &zone_lines,
        )
        .map_err(|e| refine_line(e, text, &robot_spans, &zone_spans))
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Builds a scenario from already-parsed parts (line numbers unknown).
    pub fn from_parts(
        mode: Mode,
        settings: Settings,
        robots: Vec<RawRobot>,
        zones: Vec<RawZone>,
    ) -> Result<Scenario, ScenarioError> {
        Self::assemble(mode, settings, robots, zones, &[], &[])
    }

    fn assemble(
        mode: Mode,
        settings: Settings,
        robots: Vec<RawRobot>,
        zones: Vec<RawZone>,
        robot_lines: &[usize],
        zone_lines: &[usize],
    ) -> Result<Scenario, ScenarioError> {
        let top = |path: &str, reason: String| ScenarioError::Invalid {
            line: 1,
            path: path.into(),
            reason,
        };
        let tau = settings.tau.unwrap_or(DEFAULT_TAU);
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(top("tau", format!("{tau} must be positive")));
        }
        let horizon = settings.horizon.unwrap_or(DEFAULT_HORIZON);
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(top("horizon", format!("{horizon} must be positive")));
        }
        let d_par = FollowingDistance::new(settings.d_par.unwrap_or(2.0))
            .map_err(|e| top("d_par", e.to_string()))?;
        let resolution = settings.resolution.unwrap_or(DEFAULT_RESOLUTION);
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(top("resolution", format!("{resolution} must be positive")));
        }
        if robots.is_empty() {
            return Err(top("robots", "at least one robot is required".into()));
        }

        let mut specs = Vec::with_capacity(robots.len());
        let mut index: BTreeMap<u32, usize> = BTreeMap::new();
        for (n, r) in robots.iter().enumerate() {
            let line = robot_lines.get(n).copied().unwrap_or(0);
            let err = |field: &str, reason: String| ScenarioError::Invalid {
                line,
                path: format!("robots[{n}].{field}"),
                reason,
            };
            if index.insert(r.id, n).is_some() {
                return Err(err("id", format!("duplicate robot id {}", r.id)));
            }
            let path = match (mode, &r.polyline) {
                (Mode::Geometric, Some(pts)) => {
                    let poly: Vec<Vec2> = pts.iter().map(|&p| Vec2::from(p)).collect();
                    RobotPath::Geometric(
                        PathGeometry::new(poly, r.length, r.width).map_err(|e| err("polyline", e.to_string()))?,
                    )
                }
                (Mode::Geometric, None) => {
                    let Some(name) = &r.route else {
                        return Err(err("polyline", "geometric robots need a polyline or a route".into()));
                    };
                    let route: Route = name.parse().map_err(|e: String| err("route", e))?;
                    let template = IntersectionTemplate {
                        robot_length: r.length,
                        robot_width: r.width,
                        ..IntersectionTemplate::default()
                    };
                    RobotPath::Geometric(template.path(route).map_err(|e| err("route", e.to_string()))?)
                }
                (Mode::Abstract, Some(_)) => {
                    return Err(err("polyline", "abstract scenarios take no polylines".into()))
                }
                (Mode::Abstract, None) => {
                    let s_out = r
                        .s_out
                        .ok_or_else(|| err("s_out", "abstract robots need s_out".into()))?;
                    RobotPath::Abstract(AbstractPath { s_out })
                }
            };
            let s_out = match (&path, r.s_out) {
                (_, Some(s)) => s,
                (RobotPath::Geometric(g), None) => g.exit_abscissa(),
                (RobotPath::Abstract(p), None) => p.s_out,
            };
            if let RobotPath::Geometric(g) = &path {
                if s_out > g.exit_abscissa() + 1e-9 {
                    return Err(err(
                        "s_out",
                        format!("{s_out} beyond the end of the path ({})", g.exit_abscissa()),
                    ));
                }
            }
            let spec = RobotSpec {
                id: RobotId(r.id),
                path,
                s_out,
                t_in: r.t_in,
                v_in: r.v_in,
                v_out: r.v_out,
                v_max: r.v_max,
                a_min: r.a_min,
                a_max: r.a_max,
                s_init: r.s_init,
            };
            spec.validate().map_err(|e| match e {
                GeometryError::InvalidRobot { field, reason, .. } => err(field, reason),
                other => err("id", other.to_string()),
            })?;
            specs.push(spec);
        }

        let conflicts = match mode {
            Mode::Abstract => {
                let mut out = Vec::with_capacity(zones.len());
                for (n, z) in zones.iter().enumerate() {
                    let line = zone_lines.get(n).copied().unwrap_or(0);
                    out.push(zone_conflict(n, z, &specs, &index, d_par, line)?);
                }
                out
            }
            Mode::Geometric => {
                if !zones.is_empty() {
                    return Err(ScenarioError::Invalid {
                        line: zone_lines.first().copied().unwrap_or(0),
                        path: "zones".into(),
                        reason: "geometric scenarios derive their zones".into(),
                    });
                }
                geometric_conflicts(&specs, resolution, d_par)?
            }
        };

        Ok(Scenario {
            mode,
            tau,
            horizon,
            d_par,
            resolution,
            seed: settings.seed,
            robots: specs,
            conflicts,
            raw_robots: robots,
            raw_zones: zones,
        })
    }

    pub fn to_toml(&self) -> String {
        let out = FileOut {
            mode: self.mode,
            tau: self.tau,
            horizon: self.horizon,
            d_par: self.d_par.get(),
            resolution: (self.mode == Mode::Geometric).then_some(self.resolution),
            seed: self.seed,
            robots: &self.raw_robots,
            zones: &self.raw_zones,
        };
        toml::to_string(&out).expect("scenario serializes")
    }

    pub fn raw_robots(&self) -> &[RawRobot] {
        &self.raw_robots
    }

    /// Same robots with the derived zones written out explicitly and the
    /// paths replaced by their lengths.
    pub fn to_abstract(&self) -> Result<Scenario, ScenarioError> {
        let robots = self
            .raw_robots
            .iter()
            .zip(&self.robots)
            .map(|(r, spec)| RawRobot {
                polyline: None,
                s_out: Some(spec.s_out),
                ..r.clone()
            })
            .collect();
        let zones = self
            .conflicts
            .iter()
            .map(|c| {
                let poly = c.forward.polygon.as_ref().expect("derived zones carry polygons");
                RawZone {
                    robots: [c.first().0, c.second().0],
                    a_lo: None,
                    a_hi: None,
                    b_lo: None,
                    b_hi: None,
                    d_lo: None,
                    d_hi: None,
                    vertices: Some(poly.vertices.iter().map(|&(a, b)| [a, b]).collect()),
                }
            })
            .collect();
        Scenario::from_parts(Mode::Abstract, self.settings(), robots, zones)
    }

    pub fn settings(&self) -> Settings {
        Settings {
            tau: Some(self.tau),
            horizon: Some(self.horizon),
            d_par: Some(self.d_par.get()),
            resolution: Some(self.resolution),
            seed: self.seed,
        }
    }

    /// Copy restricted to the given robots and the conflicts among them.
    pub fn subset(&self, keep: &[RobotId]) -> Scenario {
        let mut out = self.clone();
        let pick: Vec<bool> = self.robots.iter().map(|r| keep.contains(&r.id)).collect();
        out.robots = self.robots.iter().zip(&pick).filter(|p| *p.1).map(|p| p.0.clone()).collect();
        out.raw_robots = self.raw_robots.iter().zip(&pick).filter(|p| *p.1).map(|p| p.0.clone()).collect();
        out.conflicts.retain(|c| keep.contains(&c.first()) && keep.contains(&c.second()));
        out.raw_zones
            .retain(|z| keep.contains(&RobotId(z.robots[0])) && keep.contains(&RobotId(z.robots[1])));
        out
    }
}

/// Optional top-level settings; missing values take the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Settings {
    pub tau: Option<f64>,
    pub horizon: Option<f64>,
    pub d_par: Option<f64>,
    pub resolution: Option<f64>,
    pub seed: Option<u64>,
}

fn zone_conflict(
    n: usize,
    z: &RawZone,
    specs: &[RobotSpec],
    index: &BTreeMap<u32, usize>,
    d_par: FollowingDistance,
    line: usize,
) -> Result<Conflict, ScenarioError> {
    let err = |field: &str, reason: String| ScenarioError::Invalid {
        line,
        path: format!("zones[{n}].{field}"),
        reason,
    };
    let [i, j] = z.robots;
    if i == j {
        return Err(err("robots", "a zone needs two distinct robots".into()));
    }
    let lookup = |id: u32| {
        index
            .get(&id)
            .map(|&k| &specs[k])
            .ok_or_else(|| err("robots", format!("unknown robot {id}")))
    };
    let (ri, rj) = (lookup(i)?, lookup(j)?);
    let domain = Some((ri.s_out, rj.s_out));
    let poly = match &z.vertices {
        Some(vs) => CollisionPolygon::new(vs.iter().map(|v| (v[0], v[1])).collect(), domain)
            .map_err(|e| err("vertices", e.to_string()))?,
        None => {
            let need = |name: &str, v: Option<f64>| v.ok_or_else(|| err(name, "missing".into()));
            let a_lo = need("a_lo", z.a_lo)?;
            let a_hi = need("a_hi", z.a_hi)?;
            let b_lo = need("b_lo", z.b_lo)?;
            let b_hi = need("b_hi", z.b_hi)?;
            for (name, v, hi) in [
                ("a_lo", a_lo, ri.s_out),
                ("a_hi", a_hi, ri.s_out),
                ("b_lo", b_lo, rj.s_out),
                ("b_hi", b_hi, rj.s_out),
            ] {
                if !v.is_finite() || v < 0.0 {
                    return Err(err(name, format!("{v} must be a nonnegative number")));
                }
                if v > hi {
                    return Err(err(name, format!("{v} exceeds the robot's s_out {hi}")));
                }
            }
            if a_lo >= a_hi {
                return Err(err("a_hi", format!("{a_hi} must exceed a_lo = {a_lo}")));
            }
            if b_lo >= b_hi {
                return Err(err("b_hi", format!("{b_hi} must exceed b_lo = {b_lo}")));
            }
            let bounds = DirectionalBounds {
                a_lo,
                a_hi,
                b_lo,
                b_hi,
                d_lo: z.d_lo.unwrap_or(b_lo - a_hi),
                d_hi: z.d_hi.unwrap_or(b_hi - a_lo),
            };
            CollisionPolygon::from_bounds(bounds, domain).map_err(|e| err("d_lo", e.to_string()))?
        }
    };
    Conflict::from_polygon(n, (ri.id, rj.id), &poly, d_par).map_err(|e| err("robots", e.to_string()))
}

/// Conflicts of every robot pair in id order, numbered consecutively.
pub fn geometric_conflicts(
    specs: &[RobotSpec],
    resolution: f64,
    d_par: FollowingDistance,
) -> Result<Vec<Conflict>, GeometryError> {
    let mut sorted: Vec<&RobotSpec> = specs.iter().collect();
    sorted.sort_by_key(|r| r.id);
    let mut out = Vec::new();
    for (x, ri) in sorted.iter().enumerate() {
        for rj in &sorted[x + 1..] {
            let found = conflicts_between(ri, rj, resolution, d_par, out.len())?;
            out.extend(found);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABSTRACT: &str = r#"
mode = "abstract"
tau = 0.5

[[robots]]
id = 1
v_in = 10.0
s_out = 40.0

[[robots]]
id = 2
t_in = 1.0
v_in = 12.0
s_out = 40.0

[[zones]]
robots = [1, 2]
a_lo = 15.0
a_hi = 22.0
b_lo = 15.0
b_hi = 22.0
"#;

    #[test]
    fn parses_abstract_scenario() {
        let s = Scenario::parse(ABSTRACT).unwrap();
        assert_eq!(s.robots.len(), 2);
        assert_eq!(s.conflicts.len(), 1);
        assert_eq!(s.tau, 0.5);
        assert_eq!(s.horizon, DEFAULT_HORIZON);
        assert_eq!(s.robots[0].v_out, 15.0);
        let again = Scenario::parse(&s.to_toml()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn negative_zone_bound_names_field_and_line() {
        let text = ABSTRACT.replace("a_lo = 15.0", "a_lo = -1.0");
        match Scenario::parse(&text) {
            Err(ScenarioError::Invalid { line, path, .. }) => {
                assert_eq!(path, "zones[0].a_lo");
                assert_eq!(line, 18);
            }
            other => panic!("expected invalid zone, got {other:?}"),
        }
    }

    #[test]
    fn empty_robot_list_rejected() {
        let err = Scenario::parse("mode = \"abstract\"\n").unwrap_err();
        assert!(err.to_string().contains("robots"), "{err}");
    }

    #[test]
    fn robot_invariants_use_robot_path() {
        let text = ABSTRACT.replace("v_in = 12.0", "v_in = 20.0");
        let err = Scenario::parse(&text).unwrap_err();
        assert!(err.to_string().contains("robots[1].v_in"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = Scenario::parse("mode = \"abstract\"\nrobots = [\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax(_)));
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = ABSTRACT.replace("tau = 0.5", "tau = 0.5\nspeed = 3");
        assert!(matches!(Scenario::parse(&text), Err(ScenarioError::Syntax(_))));
    }
}
