use std::collections::BTreeSet;

use super::{MilpModel, ModelError, VarIndex};
use crate::geometry::RobotId;

/// Pins every column of the robots solved in an earlier batch to its value
/// in `prior_values` (a solution of `prior`). Columns past the prior
/// horizon repeat the last position with both indicators at one; speeds
/// after exit stay free. Returns the number of pinned columns.
pub fn fix_receding_horizon(
    model: &mut MilpModel,
    prior: &MilpModel,
    prior_values: &[f64],
    new_robots: &BTreeSet<RobotId>,
) -> Result<usize, ModelError> {
    let committed: BTreeSet<RobotId> = prior.robots.iter().map(|r| r.id).collect();
    if let Some(&r) = committed.intersection(new_robots).next() {
        return Err(ModelError::OverlappingBatches(r));
    }
    let prior_k = prior.meta.k;
    let value_of = |index: VarIndex| prior.col(index).map(|c| prior_values[c]);

    let mut fixes = Vec::new();
    for (id, col) in model.columns.iter().enumerate() {
        let value = match col.index {
            VarIndex::S { robot, k }
            | VarIndex::V { robot, k }
            | VarIndex::Mu { robot, k }
            | VarIndex::Sigma { robot, k }
                if committed.contains(&robot) =>
            {
                if k <= prior_k {
                    value_of(col.index)
                } else {
                    match col.index {
                        VarIndex::S { .. } => value_of(VarIndex::S { robot, k: prior_k }),
                        VarIndex::V { .. } => None,
                        _ => Some(1.0),
                    }
                }
            }
            VarIndex::Pi {
                leader, follower, ..
            } if committed.contains(&leader) && committed.contains(&follower) => {
                value_of(col.index)
            }
            VarIndex::Eps { conflict, k, .. } => {
                let both = model
                    .conflicts
                    .iter()
                    .find(|c| c.id == conflict)
                    .is_some_and(|c| committed.contains(&c.first()) && committed.contains(&c.second()));
                if both && k <= prior_k {
                    value_of(col.index)
                } else {
                    None
                }
            }
            _ => None,
        };
        if let Some(v) = value {
            let v = if col.binary { v.round() } else { v };
            let tol = 1e-6 * (1.0 + v.abs());
            if v < col.lower - tol || v > col.upper + tol {
                return Err(ModelError::InconsistentFix {
                    column: col.index.to_string(),
                    value: v,
                    lower: col.lower,
                    upper: col.upper,
                });
            }
            fixes.push((id, v.clamp(col.lower, col.upper)));
        }
    }
    for &(id, v) in &fixes {
        model.columns[id].lower = v;
        model.columns[id].upper = v;
    }
    Ok(fixes.len())
}
