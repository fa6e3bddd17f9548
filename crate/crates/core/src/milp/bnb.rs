use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use log::{debug, warn};

use super::{
    presolve, LpEngine, LpSolution, LpStatus, MilpError, PresolveStats, Propagator,
    WorkingProblem, GAP_TOL, INT_TOL,
};
use crate::model::{Family, MilpModel, VarIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    /// Wall-clock budget in seconds.
    pub time_limit: Option<f64>,
    pub node_limit: Option<u64>,
    /// Relative optimality gap.
    pub gap: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            time_limit: None,
            node_limit: None,
            gap: GAP_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimeoutWithIncumbent,
    TimeoutNoIncumbent,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub incumbent: Option<LpSolution>,
    /// Best proven upper bound on the optimum.
    pub bound: f64,
    pub root_bound: f64,
    pub nodes: u64,
    pub lp_solves: u64,
    pub max_depth: u32,
    pub wall_time: f64,
    pub presolve: PresolveStats,
}

impl SolveReport {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|s| s.objective)
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.incumbent.as_ref().map(|s| s.values.as_slice())
    }
}

/// Open subproblem: branching decisions from the root and the bound
/// inherited from its parent.
#[derive(Debug, Clone, PartialEq)]
pub struct BnbNode {
    pub fixings: Vec<(usize, f64)>,
    pub parent_bound: f64,
    pub depth: u32,
}

struct Open {
    node: BnbNode,
    seq: u64,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        self.node
            .parent_bound
            .total_cmp(&other.node.parent_bound)
            .then(self.node.depth.cmp(&other.node.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Branching class: priorities first, then zone indicators, then the
/// entry/exit indicators.
fn branch_class(index: &VarIndex) -> u8 {
    match index {
        VarIndex::Pi { .. } => 0,
        VarIndex::Eps { .. } => 1,
        _ => 2,
    }
}

struct Search<'a> {
    problem: WorkingProblem,
    prop: Propagator,
    engine: LpEngine,
    class: Vec<u8>,
    incumbent: Option<LpSolution>,
    limits: Limits,
    start: Instant,
    model: &'a MilpModel,
}

impl Search<'_> {
    fn tol(&self, value: f64) -> f64 {
        self.limits.gap * value.abs().max(1.0)
    }

    fn incumbent_obj(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(f64::NEG_INFINITY, |s| s.objective)
    }

    fn prunable(&self, bound: f64) -> bool {
        self.incumbent.is_some() && bound <= self.incumbent_obj() + self.tol(self.incumbent_obj())
    }

    fn out_of_time(&self) -> bool {
        self.limits
            .time_limit
            .is_some_and(|t| self.start.elapsed().as_secs_f64() > t)
    }

    /// Bounds of a node after its fixings and propagation.
    fn node_box(&self, fixings: &[(usize, f64)]) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut lo = self.problem.lower.clone();
        let mut hi = self.problem.upper.clone();
        let mut seeds = Vec::with_capacity(fixings.len());
        for &(c, v) in fixings {
            if v < lo[c] || v > hi[c] {
                return None;
            }
            lo[c] = v;
            hi[c] = v;
            seeds.push(c);
        }
        if !seeds.is_empty() {
            self.prop
                .propagate(&self.problem, &mut lo, &mut hi, Some(&seeds))
                .ok()?;
        }
        Some((lo, hi))
    }

    fn solve_box(&mut self, lo: &[f64], hi: &[f64]) -> Result<LpSolution, MilpError> {
        if let Some(t) = self.limits.time_limit {
            let left = t - self.start.elapsed().as_secs_f64();
            self.engine.set_time_limit(left.max(0.01));
        }
        self.engine.set_bounds(lo, hi);
        match self.engine.solve() {
            Err(MilpError::Engine(msg)) if self.out_of_time() => {
                debug!("LP interrupted by time limit: {msg}");
                Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    values: Vec::new(),
                    objective: f64::NEG_INFINITY,
                    row_activities: Vec::new(),
                    row_duals: Vec::new(),
                    reduced_costs: Vec::new(),
                })
            }
            other => other,
        }
    }

    fn branching_candidate(&self, x: &[f64], lo: &[f64], hi: &[f64]) -> Option<usize> {
        let mut best: Option<(u8, f64, usize)> = None;
        for c in 0..x.len() {
            if !self.problem.binary[c] || lo[c] == hi[c] {
                continue;
            }
            let f = x[c] - x[c].floor();
            let frac = f.min(1.0 - f);
            if frac <= INT_TOL {
                continue;
            }
            let key = (self.class[c], -frac, c);
            let better = match best {
                None => true,
                Some((bc, bf, _)) => (key.0, key.1) < (bc, bf),
            };
            if better {
                best = Some((key.0, key.1, c));
            }
        }
        best.map(|b| b.2)
    }

    /// Re-solves with every binary rounded and fixed so the incumbent is
    /// exactly integral.
    fn polish(&mut self, sol: LpSolution, lo: &[f64], hi: &[f64]) -> Result<LpSolution, MilpError> {
        let mut lo = lo.to_vec();
        let mut hi = hi.to_vec();
        for c in 0..sol.values.len() {
            if self.problem.binary[c] {
                let v = sol.values[c].round();
                lo[c] = v;
                hi[c] = v;
            }
        }
        let polished = self.solve_box(&lo, &hi)?;
        if polished.status == LpStatus::Optimal {
            Ok(polished)
        } else {
            warn!("polishing an integral relaxation failed; keeping the raw values");
            Ok(sol)
        }
    }

    fn offer(&mut self, sol: LpSolution) {
        if sol.objective > self.incumbent_obj() {
            debug!("new incumbent {:.9}", sol.objective);
            self.incumbent = Some(sol);
        }
    }
}

/// Validates a full binary assignment and returns the LP solution it
/// induces, or `None` (with a warning) when that LP is infeasible.
pub fn warm_start(model: &MilpModel, hint: &[f64]) -> Result<Option<LpSolution>, MilpError> {
    check_hint(model, hint)?;
    let Some((problem, _)) = presolve(model) else {
        warn!("hint ignored: model is infeasible");
        return Ok(None);
    };
    let mut engine = LpEngine::new(&problem);
    let sol = induced_lp(&problem, &mut engine, hint)?;
    if sol.is_none() {
        warn!("hint ignored: the induced LP is infeasible");
    }
    Ok(sol)
}

fn check_hint(model: &MilpModel, hint: &[f64]) -> Result<(), MilpError> {
    if hint.len() != model.columns.len() {
        return Err(MilpError::MalformedHint(format!(
            "{} values for {} columns",
            hint.len(),
            model.columns.len()
        )));
    }
    for c in model.binary_columns() {
        if hint[c] != 0.0 && hint[c] != 1.0 {
            return Err(MilpError::MalformedHint(format!(
                "{} = {} is not binary",
                model.columns[c].index, hint[c]
            )));
        }
    }
    for row in model.rows.iter().filter(|r| r.family == Family::H5) {
        if row.violation(hint) > 0.0 {
            let names: Vec<String> = row
                .coeffs
                .iter()
                .map(|&(c, _)| model.columns[c].index.to_string())
                .collect();
            return Err(MilpError::MalformedHint(format!(
                "exactly one of {} must be 1",
                names.join(", ")
            )));
        }
    }
    Ok(())
}

fn induced_lp(
    problem: &WorkingProblem,
    engine: &mut LpEngine,
    hint: &[f64],
) -> Result<Option<LpSolution>, MilpError> {
    let mut lo = problem.lower.clone();
    let mut hi = problem.upper.clone();
    for c in 0..hint.len() {
        if problem.binary[c] {
            if hint[c] < lo[c] || hint[c] > hi[c] {
                return Ok(None);
            }
            lo[c] = hint[c];
            hi[c] = hint[c];
        }
    }
    engine.set_bounds(&lo, &hi);
    let sol = engine.solve()?;
    Ok((sol.status == LpStatus::Optimal).then_some(sol))
}

pub fn solve_milp(model: &MilpModel, limits: Limits) -> Result<SolveReport, MilpError> {
    solve_milp_with(model, limits, None)
}

/// Best-bound branch and bound with depth-first plunging until the first
/// incumbent. Single-threaded and deterministic.
pub fn solve_milp_with(
    model: &MilpModel,
    limits: Limits,
    hint: Option<&[f64]>,
) -> Result<SolveReport, MilpError> {
    let start = Instant::now();
    if model.columns.is_empty() {
        return Err(MilpError::EmptyModel);
    }
    if let Some(h) = hint {
        check_hint(model, h)?;
    }
    let Some((problem, stats)) = presolve(model) else {
        return Ok(SolveReport {
            status: SolveStatus::Infeasible,
            incumbent: None,
            bound: f64::NEG_INFINITY,
            root_bound: f64::NEG_INFINITY,
            nodes: 0,
            lp_solves: 0,
            max_depth: 0,
            wall_time: start.elapsed().as_secs_f64(),
            presolve: PresolveStats::default(),
        });
    };
    debug!(
        "presolve: {}/{} binaries fixed, {} rows strengthened, {} rows dropped",
        stats.fixed_binaries, stats.binaries, stats.strengthened, stats.dropped_rows
    );
    let prop = Propagator::new(&problem);
    let engine = LpEngine::new(&problem);
    let class = model.columns.iter().map(|c| branch_class(&c.index)).collect();
    let mut s = Search {
        problem,
        prop,
        engine,
        class,
        incumbent: None,
        limits,
        start,
        model,
    };

    if let Some(h) = hint {
        match induced_lp(&s.problem, &mut s.engine, h)? {
            Some(sol) => s.offer(sol),
            None => warn!("hint ignored: the induced LP is infeasible"),
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut next: Option<BnbNode> = Some(BnbNode {
        fixings: Vec::new(),
        parent_bound: f64::INFINITY,
        depth: 0,
    });
    let mut nodes = 0u64;
    let mut max_depth = 0;
    let mut root_bound = f64::NEG_INFINITY;
    let mut timed_out = false;

    loop {
        let node = match next.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(Open { node, .. }) => node,
                None => break,
            },
        };
        if s.prunable(node.parent_bound) {
            continue;
        }
        if s.out_of_time() || limits.node_limit.is_some_and(|n| nodes >= n) {
            heap.push(Open { node, seq });
            timed_out = true;
            break;
        }
        nodes += 1;
        max_depth = max_depth.max(node.depth);
        let Some((lo, hi)) = s.node_box(&node.fixings) else {
            continue;
        };
        let sol = s.solve_box(&lo, &hi)?;
        if node.depth == 0 {
            root_bound = if sol.status == LpStatus::Optimal {
                sol.objective
            } else {
                f64::NEG_INFINITY
            };
        }
        if sol.status != LpStatus::Optimal {
            if s.out_of_time() {
                heap.push(Open { node, seq });
                timed_out = true;
                break;
            }
            continue;
        }
        let bound = sol.objective.min(node.parent_bound);
        if s.prunable(bound) {
            continue;
        }
        let Some(col) = s.branching_candidate(&sol.values, &lo, &hi) else {
            let sol = s.polish(sol, &lo, &hi)?;
            s.offer(sol);
            continue;
        };
        let up_first = sol.values[col] >= 0.5;
        let mut children = [1.0, 0.0];
        if !up_first {
            children.reverse();
        }
        let make = |v: f64| {
            let mut fixings = node.fixings.clone();
            fixings.push((col, v));
            BnbNode {
                fixings,
                parent_bound: bound,
                depth: node.depth + 1,
            }
        };
        let first = make(children[0]);
        let second = make(children[1]);
        seq += 1;
        heap.push(Open { node: second, seq });
        if s.incumbent.is_none() {
            next = Some(first);
        } else {
            seq += 1;
            heap.push(Open { node: first, seq });
        }
    }

    let open_bound = heap
        .iter()
        .map(|o| o.node.parent_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let inc = s.incumbent_obj();
    let status = match (timed_out, s.incumbent.is_some()) {
        (false, true) => SolveStatus::Optimal,
        (false, false) => SolveStatus::Infeasible,
        (true, true) => {
            if open_bound <= inc + s.tol(inc) {
                SolveStatus::Optimal
            } else {
                SolveStatus::TimeoutWithIncumbent
            }
        }
        (true, false) => SolveStatus::TimeoutNoIncumbent,
    };
    let bound = match status {
        SolveStatus::Optimal => inc,
        SolveStatus::Infeasible => f64::NEG_INFINITY,
        _ => open_bound.max(inc),
    };
    let _ = s.model;
    Ok(SolveReport {
        status,
        incumbent: s.incumbent,
        bound,
        root_bound,
        nodes,
        lp_solves: s.engine.solves,
        max_depth,
        wall_time: start.elapsed().as_secs_f64(),
        presolve: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RobotId;
    use crate::model::{Sense, VarIndex};

    /// max 5a + 4b + 3c  s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
    fn knapsack() -> MilpModel {
        let mut m = MilpModel::empty();
        let cols: Vec<usize> = (0..3)
            .map(|k| m.add_column(VarIndex::Mu { robot: RobotId(0), k }, 0.0, 1.0))
            .collect();
        let rows = [([2.0, 3.0, 1.0], 5.0), ([4.0, 1.0, 2.0], 11.0), ([3.0, 4.0, 2.0], 8.0)];
        for (a, b) in rows {
            m.add_row(
                Family::Cut,
                cols.iter().zip(a).map(|(&c, a)| (c, a)).collect(),
                Sense::Le,
                b,
            );
        }
        m.objective = vec![(cols[0], 5.0), (cols[1], 4.0), (cols[2], 3.0)];
        m
    }

    #[test]
    fn small_binary_program() {
        let r = solve_milp(&knapsack(), Limits::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective().unwrap() - 9.0).abs() < 1e-9);
    }

    #[test]
    fn hint_checks() {
        let m = knapsack();
        assert!(matches!(
            warm_start(&m, &[0.5, 0.0, 0.0]),
            Err(MilpError::MalformedHint(_))
        ));
        assert!(matches!(warm_start(&m, &[1.0]), Err(MilpError::MalformedHint(_))));
        // infeasible hint is ignored, not an error
        assert!(warm_start(&m, &[1.0, 1.0, 1.0]).unwrap().is_none());
        let seed = warm_start(&m, &[1.0, 0.0, 1.0]).unwrap().unwrap();
        assert!((seed.objective - 8.0).abs() < 1e-9);
    }

    #[test]
    fn optimal_hint_finishes_immediately() {
        let m = knapsack();
        let r = solve_milp_with(&m, Limits::default(), Some(&[1.0, 1.0, 0.0])).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.nodes <= 1);
    }

    #[test]
    fn node_limit_reports_timeout() {
        let r = solve_milp(
            &knapsack(),
            Limits {
                node_limit: Some(0),
                ..Limits::default()
            },
        )
        .unwrap();
        assert_eq!(r.status, SolveStatus::TimeoutNoIncumbent);
    }
}
