use serde::Serialize;

use super::{Trajectory, TrajectoryError};
use crate::geometry::{arc_pose, Conflict, RobotId, RobotSpec};

/// Penetration depth below which a configuration counts as touching, not
/// colliding.
const TOL: f64 = 1e-6;
/// Violations kept verbatim in a report; the rest are only counted.
const KEEP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationKind {
    /// Configuration inside the collision region of a conflict.
    Zone { conflict: usize },
    /// Footprints overlap in the plane.
    Footprint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub robot_i: RobotId,
    pub robot_j: RobotId,
    pub t: f64,
    pub s_i: f64,
    pub s_j: f64,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyReport {
    pub dt: f64,
    pub samples: usize,
    pub violation_count: usize,
    /// First violations in time order per pair, up to a fixed number.
    pub violations: Vec<Violation>,
    pub footprint_checks: usize,
    /// Smallest distance to a collision polygon in the `(s_i, s_j)` plane;
    /// infinite without conflicts.
    pub min_clearance: f64,
}

impl SafetyReport {
    pub fn is_safe(&self) -> bool {
        self.violation_count == 0
    }

    fn record(&mut self, v: Violation) {
        self.violation_count += 1;
        if self.violations.len() < KEEP {
            self.violations.push(v);
        }
    }
}

fn find<'a>(trajs: &'a [Trajectory], id: RobotId) -> Result<&'a Trajectory, TrajectoryError> {
    trajs
        .iter()
        .find(|t| t.robot == id)
        .ok_or(TrajectoryError::MissingRobot(id))
}

/// Sample times every `dt` over the span shared by two trajectories.
fn times(a: &Trajectory, b: &Trajectory, dt: f64) -> Vec<f64> {
    let start = a.start().max(b.start());
    let end = a.end().min(b.end());
    if end < start {
        return Vec::new();
    }
    let n = ((end - start) / dt + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|i| start + i as f64 * dt).collect();
    if end - ts.last().unwrap() > 1e-9 {
        ts.push(end);
    }
    ts
}

/// Samples every conflicting pair every `dt` and checks the configuration
/// against the conflict's collision region; robots with geometric paths are
/// additionally checked for footprint overlap while both are inside the region,
/// from entry up to (not including) exit.
pub fn verify_safety(
    trajs: &[Trajectory],
    robots: &[RobotSpec],
    conflicts: &[Conflict],
    dt: f64,
) -> Result<SafetyReport, TrajectoryError> {
    let tau = trajs.iter().map(|t| t.tau).fold(f64::INFINITY, f64::min);
    if !(dt > 0.0 && dt <= tau * (1.0 + 1e-12)) {
        return Err(TrajectoryError::InvalidStep(dt));
    }
    let mut report = SafetyReport {
        dt,
        samples: 0,
        violation_count: 0,
        violations: Vec::new(),
        footprint_checks: 0,
        min_clearance: f64::INFINITY,
    };

    for c in conflicts {
        let (a, b) = (find(trajs, c.first())?, find(trajs, c.second())?);
        for t in times(a, b, dt) {
            let (s_i, _, _) = a.state_at(t);
            let (s_j, _, _) = b.state_at(t);
            report.samples += 1;
            let inside = match &c.forward.polygon {
                Some(poly) => {
                    let d = poly.signed_distance(s_i, s_j);
                    report.min_clearance = report.min_clearance.min(d.max(0.0));
                    d < -TOL
                }
                None => c.forward.violates(s_i, s_j, TOL) && c.backward.violates(s_j, s_i, TOL),
            };
            if inside {
                report.record(Violation {
                    robot_i: c.first(),
                    robot_j: c.second(),
                    t,
                    s_i,
                    s_j,
                    kind: ViolationKind::Zone { conflict: c.id },
                });
            }
        }
    }

    let geometric: Vec<&RobotSpec> = robots.iter().filter(|r| r.geometry().is_some()).collect();
    for (x, ri) in geometric.iter().enumerate() {
        for rj in &geometric[x + 1..] {
            let (a, b) = (find(trajs, ri.id)?, find(trajs, rj.id)?);
            let (gi, gj) = (ri.geometry().unwrap(), rj.geometry().unwrap());
            let hi_i = ri.s_out.min(gi.exit_abscissa());
            let hi_j = rj.s_out.min(gj.exit_abscissa());
            for t in times(a, b, dt) {
                let (s_i, _, _) = a.state_at(t);
                let (s_j, _, _) = b.state_at(t);
                // a robot at its exit abscissa has left the region
                if !(0.0..hi_i - TOL).contains(&s_i) || !(0.0..hi_j - TOL).contains(&s_j) {
                    continue;
                }
                report.footprint_checks += 1;
                let fi = arc_pose(gi, s_i).expect("abscissa checked");
                let fj = arc_pose(gj, s_j).expect("abscissa checked");
                if fi.intersects(&fj) {
                    report.record(Violation {
                        robot_i: ri.id,
                        robot_j: rj.id,
                        t,
                        s_i,
                        s_j,
                        kind: ViolationKind::Footprint,
                    });
                }
            }
        }
    }
    Ok(report)
}
