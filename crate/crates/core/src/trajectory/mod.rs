//! Continuous-time trajectories read back from a solution, sojourn-time
//! metrics, independent safety verification and the priority oracle.

mod oracle;
mod safety;

pub use oracle::{enumerate_priorities_oracle, oracle_on_model, OracleResult};
pub use safety::{verify_safety, SafetyReport, Violation, ViolationKind};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{RobotId, RobotSpec};
use crate::milp::{MilpError, INT_TOL};
use crate::model::{MilpModel, ModelError, VarIndex};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("{column} = {value} is not integral")]
    FractionalBinary { column: String, value: f64 },
    #[error("solution has {got} values, model has {expected} columns")]
    LengthMismatch { got: usize, expected: usize },
    #[error("robot {0} never reaches its exit abscissa")]
    Liveness(RobotId),
    #[error("sampling step must lie in (0, tau], got {0}")]
    InvalidStep(f64),
    #[error("invalid trajectory for robot {robot}: {reason}")]
    Invalid { robot: RobotId, reason: String },
    #[error("no trajectory for robot {0}")]
    MissingRobot(RobotId),
    #[error("oracle sub-solve for assignment {0:#b} stopped at a limit")]
    SubsolveLimit(usize),
    #[error("every priority assignment is infeasible")]
    Infeasible,
    #[error("{0} conflicts exceed the oracle limit of {max}", max = oracle::MAX_ORACLE_CONFLICTS)]
    TooManyConflicts(usize),
    #[error("trajectory CSV line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Knot {
    pub t: f64,
    pub s: f64,
    pub v: f64,
}

/// Knots at `t = k * tau` with constant acceleration inside each step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub robot: RobotId,
    pub tau: f64,
    pub knots: Vec<Knot>,
}

impl Trajectory {
    pub fn new(robot: RobotId, tau: f64, knots: Vec<Knot>) -> Result<Self, TrajectoryError> {
        let bad = |reason: String| Err(TrajectoryError::Invalid { robot, reason });
        if !(tau > 0.0) {
            return bad(format!("tau = {tau}"));
        }
        if knots.len() < 2 {
            return bad("needs at least two knots".into());
        }
        for (k, w) in knots.windows(2).enumerate() {
            if ((w[1].t - w[0].t) - tau).abs() > 1e-9 * (1.0 + w[1].t.abs()) {
                return bad(format!("knot spacing at step {k} is not tau"));
            }
        }
        if let Some(k) = knots.iter().position(|kn| kn.v < -1e-6) {
            return bad(format!("negative speed {} at knot {k}", knots[k].v));
        }
        Ok(Trajectory { robot, tau, knots })
    }

    pub fn start(&self) -> f64 {
        self.knots[0].t
    }

    pub fn end(&self) -> f64 {
        self.knots.last().unwrap().t
    }

    /// Acceleration over step `k`.
    pub fn accel(&self, k: usize) -> f64 {
        (self.knots[k + 1].v - self.knots[k].v) / self.tau
    }

    /// Position offset at the end of step `k` not explained by constant
    /// acceleration; zero wherever the kinematic rows are active.
    fn residual(&self, k: usize) -> f64 {
        let (a, b) = (self.knots[k], self.knots[k + 1]);
        b.s - a.s - 0.5 * self.tau * (a.v + b.v)
    }

    fn step_of(&self, t: f64) -> usize {
        let k = ((t - self.start()) / self.tau).floor();
        (k.max(0.0) as usize).min(self.knots.len() - 2)
    }

    /// `(s, v, a)` at time `t`, clamped to the trajectory's time span.
    pub fn state_at(&self, t: f64) -> (f64, f64, f64) {
        let t = t.clamp(self.start(), self.end());
        let k = self.step_of(t);
        let kn = self.knots[k];
        let u = t - kn.t;
        let a = self.accel(k);
        let s = kn.s + kn.v * u + 0.5 * a * u * u + self.residual(k) * u / self.tau;
        (s, kn.v + a * u, a)
    }

    /// Dense `(t, s, v)` samples every `dt`, always including the last knot.
    pub fn sample(&self, dt: f64) -> Result<Vec<(f64, f64, f64)>, TrajectoryError> {
        if !(dt > 0.0 && dt <= self.tau * (1.0 + 1e-12)) {
            return Err(TrajectoryError::InvalidStep(dt));
        }
        let n = ((self.end() - self.start()) / dt + 1e-9).floor() as usize;
        let mut out: Vec<(f64, f64, f64)> = (0..=n)
            .map(|i| {
                let t = self.start() + i as f64 * dt;
                let (s, v, _) = self.state_at(t);
                (t, s, v)
            })
            .collect();
        if self.end() - out.last().unwrap().0 > 1e-9 {
            let last = self.knots.last().unwrap();
            out.push((last.t, last.s, last.v));
        }
        Ok(out)
    }

    /// First time at which the position reaches `target`, resolved inside
    /// the step by the position quadratic.
    pub fn crossing_time(&self, target: f64) -> Option<f64> {
        if self.knots[0].s >= target {
            return Some(self.start());
        }
        let k = (0..self.knots.len() - 1).find(|&k| self.knots[k + 1].s >= target)?;
        let kn = self.knots[k];
        let a = self.accel(k);
        let lin = kn.v + self.residual(k) / self.tau;
        let rhs = target - kn.s;
        // 0.5 a u^2 + lin u - rhs = 0 on [0, tau]
        let pos = |u: f64| lin * u + 0.5 * a * u * u - rhs;
        let (qa, qb, qc) = (0.5 * a, lin, -rhs);
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        let q = -0.5 * (qb + disc.sqrt().copysign(if qb >= 0.0 { 1.0 } else { -1.0 }));
        let mut roots = vec![];
        if q != 0.0 {
            roots.push(qc / q);
        }
        if qa.abs() > 1e-12 {
            roots.push(q / qa);
        }
        let u = roots
            .into_iter()
            .filter(|r| r.is_finite() && *r >= -1e-9 && *r <= self.tau + 1e-9 && pos(*r).abs() < 1e-6 * (1.0 + rhs))
            .fold(None, |best: Option<f64>, r| Some(best.map_or(r, |b| b.min(r))))
            .unwrap_or_else(|| {
                let (mut lo, mut hi) = (0.0, self.tau);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if pos(mid) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            });
        Some(kn.t + u.clamp(0.0, self.tau))
    }

    /// `robot,t,s,v,a` rows, one per knot; `a` is the acceleration of the
    /// step starting at the knot (zero at the last one).
    pub fn write_csv_rows(&self, out: &mut String) {
        for (k, kn) in self.knots.iter().enumerate() {
            let a = if k + 1 < self.knots.len() { self.accel(k) } else { 0.0 };
            let _ = writeln!(out, "{},{},{},{},{}", self.robot, kn.t, kn.s, kn.v, a);
        }
    }
}

pub fn trajectories_csv(trajs: &[Trajectory]) -> String {
    let mut out = String::from("robot,t,s,v,a\n");
    for t in trajs {
        t.write_csv_rows(&mut out);
    }
    out
}

/// Reads the format written by [`trajectories_csv`]; the step of each
/// robot is the spacing of its first two knots.
pub fn read_trajectories_csv(text: &str) -> Result<Vec<Trajectory>, TrajectoryError> {
    let mut rows: BTreeMap<RobotId, Vec<Knot>> = BTreeMap::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = lines.next();
    if header.map(|(_, h)| h.trim()) != Some("robot,t,s,v,a") {
        return Err(TrajectoryError::Csv {
            line: header.map_or(1, |(n, _)| n + 1),
            msg: "expected header robot,t,s,v,a".into(),
        });
    }
    for (n, line) in lines {
        let bad = |msg: String| TrajectoryError::Csv { line: n + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        let robot: u32 = fields[0].parse().map_err(|_| bad(format!("bad robot id '{}'", fields[0])))?;
        let num = |k: usize| -> Result<f64, TrajectoryError> {
            fields[k]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("bad number '{}'", fields[k])))
        };
        let knot = Knot {
            t: num(1)?,
            s: num(2)?,
            v: num(3)?,
        };
        num(4)?;
        rows.entry(RobotId(robot)).or_default().push(knot);
    }
    rows.into_iter()
        .map(|(robot, knots)| {
            let tau = match knots.as_slice() {
                [a, b, ..] => b.t - a.t,
                _ => {
                    return Err(TrajectoryError::Invalid {
                        robot,
                        reason: "needs at least two knots".into(),
                    })
                }
            };
            Trajectory::new(robot, tau, knots)
        })
        .collect()
}

/// `leader` passes `follower` first in conflict `conflict`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PriorityEdge {
    pub conflict: usize,
    pub leader: RobotId,
    pub follower: RobotId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PriorityGraph {
    pub edges: Vec<PriorityEdge>,
}

impl PriorityGraph {
    pub fn new(mut edges: Vec<PriorityEdge>) -> Self {
        edges.sort();
        edges.dedup();
        PriorityGraph { edges }
    }

    /// Robot-level relation `(leader, follower)`.
    pub fn relation(&self) -> BTreeSet<(RobotId, RobotId)> {
        self.edges.iter().map(|e| (e.leader, e.follower)).collect()
    }

    pub fn leads(&self, leader: RobotId, follower: RobotId) -> bool {
        self.edges
            .iter()
            .any(|e| e.leader == leader && e.follower == follower)
    }

    pub fn union(&self, other: &PriorityGraph) -> PriorityGraph {
        PriorityGraph::new(self.edges.iter().chain(&other.edges).copied().collect())
    }

    /// Whether the robot-level relation has no directed cycle.
    pub fn is_acyclic(&self) -> bool {
        let mut succ: BTreeMap<RobotId, Vec<RobotId>> = BTreeMap::new();
        let mut indeg: BTreeMap<RobotId, usize> = BTreeMap::new();
        for (a, b) in self.relation() {
            succ.entry(a).or_default().push(b);
            indeg.entry(a).or_insert(0);
            *indeg.entry(b).or_insert(0) += 1;
        }
        let mut ready: Vec<RobotId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(r, _)| *r).collect();
        let mut seen = 0;
        while let Some(r) = ready.pop() {
            seen += 1;
            for &n in succ.get(&r).map(|v| v.as_slice()).unwrap_or(&[]) {
                let d = indeg.get_mut(&n).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(n);
                }
            }
        }
        seen == indeg.len()
    }
}

impl fmt::Display for PriorityGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .relation()
            .iter()
            .map(|(a, b)| format!("{a}>{b}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `"1>3,3>2"` into `(leader, follower)` pairs.
pub fn parse_priorities(text: &str) -> Result<Vec<(RobotId, RobotId)>, String> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p
                .split_once('>')
                .ok_or_else(|| format!("'{p}' is not of the form i>j"))?;
            let id = |s: &str| {
                s.trim()
                    .parse::<u32>()
                    .map(RobotId)
                    .map_err(|_| format!("'{s}' is not a robot id"))
            };
            Ok((id(a)?, id(b)?))
        })
        .collect()
}

/// Reads trajectories and the priority graph from a solution vector.
pub fn extract(model: &MilpModel, values: &[f64]) -> Result<(Vec<Trajectory>, PriorityGraph), TrajectoryError> {
    if values.len() != model.columns.len() {
        return Err(TrajectoryError::LengthMismatch {
            got: values.len(),
            expected: model.columns.len(),
        });
    }
    for c in model.binary_columns() {
        if (values[c] - values[c].round()).abs() > INT_TOL {
            return Err(TrajectoryError::FractionalBinary {
                column: model.columns[c].index.to_string(),
                value: values[c],
            });
        }
    }
    let tau = model.meta.tau;
    let mut trajs = Vec::with_capacity(model.robots.len());
    for r in &model.robots {
        let mut knots: Vec<Knot> = (0..=model.meta.k)
            .map(|k| {
                let s = values[model.id(VarIndex::S { robot: r.id, k })];
                let v = values[model.id(VarIndex::V { robot: r.id, k })];
                Knot {
                    t: k as f64 * tau,
                    s,
                    v: v.max(0.0),
                }
            })
            .collect();
        // Knots after the first exited one are unconstrained in the program;
        // replace them by cruising at the exit speed.
        let exited = (0..=model.meta.k).find(|&k| values[model.id(VarIndex::Sigma { robot: r.id, k })] > 0.5);
        if let Some(k0) = exited.map(|k| k as usize) {
            let v = knots[k0].v;
            for k in k0 + 1..knots.len() {
                knots[k].s = knots[k - 1].s + tau * v;
                knots[k].v = v;
            }
        }
        trajs.push(Trajectory::new(r.id, tau, knots)?);
    }
    let edges = model
        .columns
        .iter()
        .enumerate()
        .filter_map(|(c, col)| match col.index {
            VarIndex::Pi {
                conflict,
                leader,
                follower,
            } if values[c] > 0.5 => Some(PriorityEdge {
                conflict,
                leader,
                follower,
            }),
            _ => None,
        })
        .collect();
    Ok((trajs, PriorityGraph::new(edges)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobotMetrics {
    pub robot: RobotId,
    pub t_in: f64,
    pub t_out: f64,
    pub sojourn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub robots: Vec<RobotMetrics>,
    pub mean_sojourn: f64,
    /// Smallest distance to any collision polygon over the verified samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_clearance: Option<f64>,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Exit times with sub-step precision and the mean sojourn time.
pub fn metrics(trajs: &[Trajectory], robots: &[RobotSpec]) -> Result<Metrics, TrajectoryError> {
    let mut out = Vec::with_capacity(robots.len());
    for r in robots {
        let traj = trajs
            .iter()
            .find(|t| t.robot == r.id)
            .ok_or(TrajectoryError::MissingRobot(r.id))?;
        let t_out = traj
            .crossing_time(r.s_out)
            .ok_or(TrajectoryError::Liveness(r.id))?;
        out.push(RobotMetrics {
            robot: r.id,
            t_in: r.t_in,
            t_out,
            sojourn: t_out - r.t_in,
        });
    }
    let mean_sojourn = if out.is_empty() {
        0.0
    } else {
        out.iter().map(|m| m.sojourn).sum::<f64>() / out.len() as f64
    };
    Ok(Metrics {
        robots: out,
        mean_sojourn,
        min_clearance: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(vs: &[f64], tau: f64) -> Trajectory {
        let mut knots = vec![Knot { t: 0.0, s: 0.0, v: vs[0] }];
        for (k, &v) in vs.iter().enumerate().skip(1) {
            let prev = knots[k - 1];
            knots.push(Knot {
                t: k as f64 * tau,
                s: prev.s + 0.5 * tau * (prev.v + v),
                v,
            });
        }
        Trajectory::new(RobotId(1), tau, knots).unwrap()
    }

    #[test]
    fn mid_step_state() {
        let t = traj(&[10.0, 14.0], 1.0);
        let (s, v, a) = t.state_at(0.5);
        assert!((v - 12.0).abs() < 1e-12);
        assert!((s - 5.5).abs() < 1e-12);
        assert_eq!(a, 4.0);
    }

    #[test]
    fn uniform_motion_has_zero_acceleration_and_linear_samples() {
        let t = traj(&[15.0; 5], 1.0);
        assert!((0..4).all(|k| t.accel(k) == 0.0));
        for (time, s, _) in t.sample(0.1).unwrap() {
            assert!((s - 15.0 * time).abs() < 1e-9);
        }
    }

    #[test]
    fn exit_time_is_sub_step() {
        let t = traj(&[15.0; 5], 1.0);
        assert!((t.crossing_time(30.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((t.crossing_time(22.5).unwrap() - 1.5).abs() < 1e-12);
        let acc = traj(&[0.0, 4.0, 8.0], 1.0);
        // s = 2 t^2
        assert!((acc.crossing_time(4.5).unwrap() - 1.5).abs() < 1e-9);
        assert!(acc.crossing_time(100.0).is_none());
    }

    #[test]
    fn decelerating_crossing_picks_first_root() {
        // s = 10 t - 1.5 t^2 on [0, 2]
        let t = traj(&[10.0, 7.0, 4.0], 1.0);
        let tc = t.crossing_time(12.0).unwrap();
        assert!((10.0 * tc - 1.5 * tc * tc - 12.0).abs() < 1e-9);
        assert!(tc < 2.0);
    }

    #[test]
    fn sample_rejects_bad_step() {
        let t = traj(&[1.0, 1.0], 0.5);
        assert!(t.sample(0.0).is_err());
        assert!(t.sample(0.6).is_err());
        assert_eq!(t.sample(0.5).unwrap().len(), 2);
    }

    #[test]
    fn priority_text_round_trip() {
        let pairs = parse_priorities("1>3, 3>2,1>2").unwrap();
        assert_eq!(pairs, vec![(RobotId(1), RobotId(3)), (RobotId(3), RobotId(2)), (RobotId(1), RobotId(2))]);
        assert!(parse_priorities("1-2").is_err());
        let g = PriorityGraph::new(
            pairs
                .iter()
                .enumerate()
                .map(|(c, &(leader, follower))| PriorityEdge { conflict: c, leader, follower })
                .collect(),
        );
        assert_eq!(g.to_string(), "1>2,1>3,3>2");
        assert!(g.is_acyclic());
        let cyc = g.union(&PriorityGraph::new(vec![PriorityEdge {
            conflict: 9,
            leader: RobotId(2),
            follower: RobotId(1),
        }]));
        assert!(!cyc.is_acyclic());
    }

    #[test]
    fn csv_header_and_rows() {
        let csv = trajectories_csv(&[traj(&[10.0, 14.0], 1.0)]);
        assert_eq!(csv, "robot,t,s,v,a\n1,0,0,10,4\n1,1,12,14,0\n");
        let back = read_trajectories_csv(&csv).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].knots.len(), 2);
        assert_eq!(back[0].tau, 1.0);
        let err = read_trajectories_csv("robot,t,s,v,a\n1,0,x,1,0\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
