use rayon::prelude::*;

use super::{extract, PriorityGraph, TrajectoryError};
use crate::geometry::{Conflict, RobotSpec};
use crate::milp::{solve_milp, Limits, SolveStatus};
use crate::model::{build_model, fix_priority, Discretization, MilpModel, ModelOptions};

/// Largest number of conflicts the oracle enumerates (`2^6` sub-solves).
pub const MAX_ORACLE_CONFLICTS: usize = 6;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    /// Per conflict, in model order: whether the conflict's first robot
    /// passes first.
    pub assignment: Vec<bool>,
    pub graph: PriorityGraph,
    pub values: Vec<f64>,
    pub subsolves: usize,
    pub feasible: usize,
}

/// Solves the model once per priority assignment with all priorities
/// pinned and keeps the best. Ties go to the lexicographically smallest
/// assignment vector.
pub fn oracle_on_model(model: &MilpModel, limits: Limits) -> Result<OracleResult, TrajectoryError> {
    let p = model.conflicts.len();
    if p > MAX_ORACLE_CONFLICTS {
        return Err(TrajectoryError::TooManyConflicts(p));
    }
    let outcomes: Vec<Result<Option<(Vec<bool>, f64, Vec<f64>)>, TrajectoryError>> = (0..1usize << p)
        .into_par_iter()
        .map(|mask| {
            let assignment: Vec<bool> = (0..p).map(|c| mask >> c & 1 == 1).collect();
            let mut sub = model.clone();
            for (c, &first_leads) in model.conflicts.iter().zip(&assignment) {
                let leader = if first_leads { c.first() } else { c.second() };
                fix_priority(&mut sub, c.id, leader)?;
            }
            let report = solve_milp(&sub, limits)?;
            match report.status {
                SolveStatus::Optimal => {
                    let sol = report.incumbent.expect("optimal report has an incumbent");
                    Ok(Some((assignment, sol.objective, sol.values)))
                }
                SolveStatus::Infeasible => Ok(None),
                _ => Err(TrajectoryError::SubsolveLimit(mask)),
            }
        })
        .collect();

    let mut best: Option<(Vec<bool>, f64, Vec<f64>)> = None;
    let mut feasible = 0;
    for out in outcomes {
        let Some((assignment, obj, values)) = out? else {
            continue;
        };
        feasible += 1;
        let better = match &best {
            None => true,
            Some((b_assign, b_obj, _)) => {
                let tol = 1e-9 * b_obj.abs().max(1.0);
                obj > b_obj + tol || ((obj - b_obj).abs() <= tol && assignment < *b_assign)
            }
        };
        if better {
            best = Some((assignment, obj, values));
        }
    }
    let (assignment, objective, values) = best.ok_or(TrajectoryError::Infeasible)?;
    let (_, graph) = extract(model, &values)?;
    Ok(OracleResult {
        objective,
        assignment,
        graph,
        values,
        subsolves: 1 << p,
        feasible,
    })
}

pub fn enumerate_priorities_oracle(
    robots: &[RobotSpec],
    conflicts: &[Conflict],
    disc: Discretization,
    options: ModelOptions,
    limits: Limits,
) -> Result<OracleResult, TrajectoryError> {
    let model = build_model(robots, conflicts, disc, options)?;
    oracle_on_model(&model, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AbstractPath, CollisionPolygon, FollowingDistance, RobotId, RobotPath};
    use crate::milp::solve_milp;

    fn robot(id: u32, t_in: f64) -> RobotSpec {
        RobotSpec {
            id: RobotId(id),
            path: RobotPath::Abstract(AbstractPath { s_out: 40.0 }),
            s_out: 40.0,
            t_in,
            v_in: 10.0,
            v_out: 15.0,
            v_max: 15.0,
            a_min: -3.0,
            a_max: 4.0,
            s_init: None,
        }
    }

    #[test]
    fn two_robots_one_zone() {
        let poly = CollisionPolygon::new(
            vec![(15.0, 15.0), (22.0, 15.0), (22.0, 22.0), (15.0, 22.0)],
            Some((40.0, 40.0)),
        )
        .unwrap();
        let conflict = Conflict::from_polygon(0, (RobotId(1), RobotId(2)), &poly, FollowingDistance::default()).unwrap();
        let robots = [robot(1, 0.0), robot(2, 0.5)];
        let disc = Discretization::new(0.5, 16).unwrap();
        let model = build_model(&robots, &[conflict.clone()], disc, ModelOptions::default()).unwrap();
        let oracle = oracle_on_model(&model, Limits::default()).unwrap();
        assert_eq!(oracle.subsolves, 2);
        let joint = solve_milp(&model, Limits::default()).unwrap();
        assert!((joint.objective().unwrap() - oracle.objective).abs() < 1e-6);
        // the earlier arrival keeps its speed and passes first
        assert!(oracle.graph.leads(RobotId(1), RobotId(2)));
        assert_eq!(oracle.assignment, vec![true]);
    }
}
