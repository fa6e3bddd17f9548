use std::collections::VecDeque;

use crate::model::{MilpModel, Sense};

/// A row `lo <= sum(a_j x_j) <= hi`; infinite sides are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkRow {
    pub coeffs: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

/// Solver-side copy of a model: ranged rows, dense objective and the
/// current global bounds. Presolve rewrites it; the model stays untouched.
#[derive(Debug, Clone)]
pub struct WorkingProblem {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binary: Vec<bool>,
    pub objective: Vec<f64>,
    pub rows: Vec<WorkRow>,
}

impl WorkingProblem {
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.columns.len();
        let mut objective = vec![0.0; n];
        for &(c, a) in &model.objective {
            objective[c] += a;
        }
        let rows = model
            .rows
            .iter()
            .map(|r| {
                let (lo, hi) = match r.sense {
                    Sense::Le => (f64::NEG_INFINITY, r.rhs),
                    Sense::Ge => (r.rhs, f64::INFINITY),
                    Sense::Eq => (r.rhs, r.rhs),
                };
                let coeffs = r.coeffs.iter().copied().filter(|&(_, a)| a != 0.0).collect();
                WorkRow { coeffs, lo, hi }
            })
            .collect();
        WorkingProblem {
            lower: model.columns.iter().map(|c| c.lower).collect(),
            upper: model.columns.iter().map(|c| c.upper).collect(),
            binary: model.columns.iter().map(|c| c.binary).collect(),
            objective,
            rows,
        }
    }

    pub fn num_cols(&self) -> usize {
        self.lower.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, v)| a * v).sum()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PresolveStats {
    pub binaries: usize,
    pub fixed_binaries: usize,
    pub strengthened: usize,
    pub dropped_rows: usize,
}

/// Row activity bounds over a box.
fn activity(row: &WorkRow, lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for &(c, a) in &row.coeffs {
        if a > 0.0 {
            lo += a * lower[c];
            hi += a * upper[c];
        } else {
            lo += a * upper[c];
            hi += a * lower[c];
        }
    }
    (lo, hi)
}

/// Feasibility-based bound tightening over the rows of a problem.
#[derive(Debug, Clone)]
pub struct Propagator {
    col_rows: Vec<Vec<usize>>,
    /// Cap on row visits per call, as a multiple of the row count.
    pub work_factor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Infeasible;

impl Propagator {
    pub fn new(problem: &WorkingProblem) -> Self {
        let mut col_rows = vec![Vec::new(); problem.num_cols()];
        for (r, row) in problem.rows.iter().enumerate() {
            for &(c, _) in &row.coeffs {
                col_rows[c].push(r);
            }
        }
        Propagator {
            col_rows,
            work_factor: 20,
        }
    }

    /// Tightens `lower`/`upper` in place. With `seeds`, only rows touching
    /// those columns are examined first. Returns the columns whose bounds
    /// moved.
    pub fn propagate(
        &self,
        problem: &WorkingProblem,
        lower: &mut [f64],
        upper: &mut [f64],
        seeds: Option<&[usize]>,
    ) -> Result<Vec<usize>, Infeasible> {
        let nrows = problem.rows.len();
        let mut queued = vec![false; nrows];
        let mut queue = VecDeque::new();
        match seeds {
            Some(cols) => {
                for &c in cols {
                    for &r in &self.col_rows[c] {
                        if !queued[r] {
                            queued[r] = true;
                            queue.push_back(r);
                        }
                    }
                }
            }
            None => {
                queue.extend(0..nrows);
                queued.iter_mut().for_each(|q| *q = true);
            }
        }
        let mut touched = vec![false; lower.len()];
        let mut changed = Vec::new();
        let budget = self.work_factor * nrows.max(1);
        let mut visits = 0;
        while let Some(r) = queue.pop_front() {
            queued[r] = false;
            visits += 1;
            if visits > budget {
                break;
            }
            let row = &problem.rows[r];
            let (minact, maxact) = activity(row, lower, upper);
            if minact > row.hi + 1e-6 * (1.0 + row.hi.abs())
                || maxact < row.lo - 1e-6 * (1.0 + row.lo.abs())
            {
                return Err(Infeasible);
            }
            for &(c, a) in &row.coeffs {
                let (cmin, cmax) = if a > 0.0 {
                    (a * lower[c], a * upper[c])
                } else {
                    (a * upper[c], a * lower[c])
                };
                let mut new_lo = lower[c];
                let mut new_hi = upper[c];
                if row.hi.is_finite() {
                    // a x <= hi - (minact - cmin)
                    let bound = (row.hi - (minact - cmin)) / a;
                    if a > 0.0 {
                        new_hi = new_hi.min(bound);
                    } else {
                        new_lo = new_lo.max(bound);
                    }
                }
                if row.lo.is_finite() {
                    let bound = (row.lo - (maxact - cmax)) / a;
                    if a > 0.0 {
                        new_lo = new_lo.max(bound);
                    } else {
                        new_hi = new_hi.min(bound);
                    }
                }
                if problem.binary[c] {
                    new_lo = (new_lo - 1e-6).ceil();
                    new_hi = (new_hi + 1e-6).floor();
                }
                let mut moved = false;
                let range = upper[c] - lower[c];
                let min_step = 1e-7 * (1.0 + new_lo.abs()) + 1e-3 * range;
                if new_lo > lower[c] + min_step || (problem.binary[c] && new_lo > lower[c]) {
                    lower[c] = new_lo;
                    moved = true;
                }
                let min_step = 1e-7 * (1.0 + new_hi.abs()) + 1e-3 * range;
                if new_hi < upper[c] - min_step || (problem.binary[c] && new_hi < upper[c]) {
                    upper[c] = new_hi;
                    moved = true;
                }
                if lower[c] > upper[c] {
                    if lower[c] - upper[c] > 1e-6 * (1.0 + lower[c].abs()) {
                        return Err(Infeasible);
                    }
                    let mid = 0.5 * (lower[c] + upper[c]);
                    lower[c] = mid;
                    upper[c] = mid;
                }
                if moved {
                    if !touched[c] {
                        touched[c] = true;
                        changed.push(c);
                    }
                    for &r2 in &self.col_rows[c] {
                        if r2 != r && !queued[r2] {
                            queued[r2] = true;
                            queue.push_back(r2);
                        }
                    }
                }
            }
        }
        changed.sort_unstable();
        Ok(changed)
    }
}

/// Shrinks big-M coefficients of binaries on inequality rows to the
/// smallest values valid over the current bounds.
fn strengthen(problem: &mut WorkingProblem) -> usize {
    let mut count = 0;
    let (lower, upper) = (&problem.lower, &problem.upper);
    for row in &mut problem.rows {
        let flip = match (row.lo.is_finite(), row.hi.is_finite()) {
            (false, true) => false,
            (true, false) => true,
            _ => continue,
        };
        // work on the <= form
        let mut b = if flip { -row.lo } else { row.hi };
        let mut coeffs: Vec<(usize, f64)> = row
            .coeffs
            .iter()
            .map(|&(c, a)| (c, if flip { -a } else { a }))
            .collect();
        let mut changed = false;
        for idx in 0..coeffs.len() {
            let (c, a) = coeffs[idx];
            if !problem.binary[c] || lower[c] == upper[c] {
                continue;
            }
            let maxact: f64 = coeffs
                .iter()
                .map(|&(c, a)| if a > 0.0 { a * upper[c] } else { a * lower[c] })
                .sum();
            if a > 0.0 {
                let rest = maxact - a;
                if rest < b - 1e-9 {
                    let d = b - rest;
                    coeffs[idx].1 = a - d;
                    b -= d;
                    changed = true;
                }
            } else if a < 0.0 {
                let with_one = maxact + a;
                if with_one < b - 1e-9 {
                    let d = b - with_one;
                    coeffs[idx].1 = a + d;
                    changed = true;
                }
            }
        }
        if changed {
            count += 1;
            coeffs.retain(|&(_, a)| a.abs() > 1e-12);
            if flip {
                row.coeffs = coeffs.into_iter().map(|(c, a)| (c, -a)).collect();
                row.lo = -b;
            } else {
                row.coeffs = coeffs;
                row.hi = b;
            }
        }
    }
    count
}

/// Root presolve: bound propagation, coefficient strengthening and removal
/// of rows implied by the bounds. `None` when propagation proves the
/// problem infeasible.
pub fn presolve(model: &MilpModel) -> Option<(WorkingProblem, PresolveStats)> {
    let mut problem = WorkingProblem::from_model(model);
    let binaries = problem.binary.iter().filter(|b| **b).count();
    let prop = Propagator::new(&problem);
    let (mut lo, mut hi) = (problem.lower.clone(), problem.upper.clone());
    prop.propagate(&problem, &mut lo, &mut hi, None).ok()?;
    problem.lower = lo;
    problem.upper = hi;

    let strengthened = strengthen(&mut problem);

    let before = problem.rows.len();
    let (lower, upper) = (&problem.lower, &problem.upper);
    problem.rows.retain(|row| {
        let (minact, maxact) = activity(row, lower, upper);
        let slack = 1e-9;
        !(minact >= row.lo - slack && maxact <= row.hi + slack)
    });
    let dropped_rows = before - problem.rows.len();
    // binaries left in no row and without cost can take either value
    let mut used = vec![false; problem.num_cols()];
    for row in &problem.rows {
        for &(c, _) in &row.coeffs {
            used[c] = true;
        }
    }
    for c in 0..problem.num_cols() {
        if problem.binary[c] && !used[c] && problem.objective[c] == 0.0 {
            problem.upper[c] = problem.lower[c];
        }
    }
    let fixed_binaries = (0..problem.num_cols())
        .filter(|&c| problem.binary[c] && problem.lower[c] == problem.upper[c])
        .count();
    Some((
        problem,
        PresolveStats {
            binaries,
            fixed_binaries,
            strengthened,
            dropped_rows,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RobotId;
    use crate::model::{Family, VarIndex};

    fn bin(m: &mut MilpModel, k: u32) -> usize {
        m.add_column(VarIndex::Mu { robot: RobotId(0), k }, 0.0, 1.0)
    }

    #[test]
    fn propagation_fixes_binary_through_big_m() {
        let mut m = MilpModel::empty();
        let s = m.add_column(VarIndex::S { robot: RobotId(0), k: 0 }, -10.0, -2.0);
        let mu = bin(&mut m, 0);
        // mu = 1 => s >= 0 written as s - 10 mu >= -10
        m.add_row(Family::H2, vec![(s, 1.0), (mu, -10.0)], Sense::Ge, -10.0);
        let (p, stats) = presolve(&m).unwrap();
        assert_eq!((p.lower[mu], p.upper[mu]), (0.0, 0.0));
        assert_eq!(stats.fixed_binaries, 1);
    }

    #[test]
    fn free_binary_without_cost_is_fixed() {
        let mut m = MilpModel::empty();
        let a = bin(&mut m, 0);
        let b = bin(&mut m, 1);
        m.add_row(Family::H5, vec![(a, 1.0)], Sense::Le, 1.0);
        m.add_row(Family::H5, vec![(a, 1.0), (a, 0.0)], Sense::Ge, 0.5);
        let (p, _) = presolve(&m).unwrap();
        assert_eq!(p.upper[b], 0.0);
        assert_eq!(p.upper[a], 1.0);
    }

    #[test]
    fn detects_infeasibility() {
        let mut m = MilpModel::empty();
        let a = bin(&mut m, 0);
        let b = bin(&mut m, 1);
        m.add_row(Family::H5, vec![(a, 1.0), (b, 1.0)], Sense::Ge, 3.0);
        assert!(presolve(&m).is_none());
    }

    #[test]
    fn strengthening_shrinks_big_m() {
        let mut m = MilpModel::empty();
        let s = m.add_column(VarIndex::S { robot: RobotId(0), k: 0 }, 0.0, 5.0);
        let mu = bin(&mut m, 0);
        // mu = 0 => s <= 0, with a loose M of 100
        m.add_row(Family::H1, vec![(s, 1.0), (mu, -100.0)], Sense::Le, 0.0);
        let (p, stats) = presolve(&m).unwrap();
        assert_eq!(stats.strengthened, 1);
        assert_eq!(p.rows[0].coeffs, vec![(s, 1.0), (mu, -5.0)]);
        assert_eq!(p.rows[0].hi, 0.0);
    }
}
