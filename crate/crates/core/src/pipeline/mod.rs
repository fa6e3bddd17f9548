//! End-to-end drivers: scenario to model to solution to verified
//! trajectories, batch (receding-horizon) solving and the experiments.

mod experiments;
mod plot;

pub use experiments::{
    export_time, exp_runtime, exp_timestep, RuntimeConfig, RuntimeResult, RuntimeRow, TauSummary, TimestepConfig,
    TimestepResult, TimestepRow,
};
pub use plot::{spearman, LineChart, Series};

use std::collections::BTreeSet;

use log::{info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, RobotId};
use crate::milp::{solve_milp_with, Limits, MilpError, SolveReport, SolveStatus};
use crate::model::{
    build_model, fix_priority, fix_receding_horizon, force_priorities, Discretization, MilpModel, ModelError,
    ModelOptions, VarIndex,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::trajectory::{
    extract, metrics, verify_safety, Metrics, PriorityGraph, SafetyReport, Trajectory, TrajectoryError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("batch {batch} ended with status {status:?}")]
    Batch { batch: usize, status: SolveStatus },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Overrides the scenario's time step.
    pub tau: Option<f64>,
    pub horizon: Option<f64>,
    pub force_priorities: Vec<(RobotId, RobotId)>,
    pub model: ModelOptions,
    pub limits: Limits,
    /// Safety sampling step as a fraction of tau.
    pub verify_divisor: f64,
    /// Seed the search with the solution for first-come-first-served
    /// priorities.
    pub warm_start: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tau: None,
            horizon: None,
            force_priorities: Vec::new(),
            model: ModelOptions::default(),
            limits: Limits::default(),
            verify_divisor: 20.0,
            warm_start: false,
        }
    }
}

impl SolveOptions {
    pub fn discretization(&self, scn: &Scenario) -> Result<Discretization, ModelError> {
        Discretization::covering(
            &scn.robots,
            self.tau.unwrap_or(scn.tau),
            self.horizon.unwrap_or(scn.horizon),
        )
    }
}

/// Why a model has no solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibilityCause {
    /// A longer horizon admits a solution.
    HorizonTooShort,
    /// Even a much longer horizon does not help: some initial state cannot
    /// be made safe.
    UnsafeInitialState,
    /// The diagnosis itself hit a limit.
    Unknown,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub model: MilpModel,
    pub report: SolveReport,
    pub trajectories: Vec<Trajectory>,
    pub graph: PriorityGraph,
    pub metrics: Option<Metrics>,
    pub safety: Option<SafetyReport>,
}

impl SolveOutcome {
    pub fn status(&self) -> SolveStatus {
        self.report.status
    }

    pub fn objective(&self) -> Option<f64> {
        self.report.objective()
    }
}

/// Serializable summary of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct ReportJson {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub bound: f64,
    pub root_bound: f64,
    pub nodes: u64,
    pub lp_solves: u64,
    pub wall_time: f64,
    pub tau: f64,
    pub steps: u32,
    pub columns: usize,
    pub rows: usize,
    pub binaries: usize,
    pub fixed_by_presolve: usize,
    pub priorities: String,
    pub scenario_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasibility: Option<InfeasibilityCause>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safety: Option<SafetyReport>,
}

impl ReportJson {
    pub fn new(out: &SolveOutcome, infeasibility: Option<InfeasibilityCause>) -> Self {
        let finite = |x: f64| if x.is_finite() { x } else { f64::NAN };
        ReportJson {
            status: out.report.status,
            objective: out.objective(),
            bound: finite(out.report.bound),
            root_bound: finite(out.report.root_bound),
            nodes: out.report.nodes,
            lp_solves: out.report.lp_solves,
            wall_time: out.report.wall_time,
            tau: out.model.meta.tau,
            steps: out.model.meta.k,
            columns: out.model.columns.len(),
            rows: out.model.rows.len(),
            binaries: out.report.presolve.binaries,
            fixed_by_presolve: out.report.presolve.fixed_binaries,
            priorities: out.graph.to_string(),
            scenario_hash: format!("{:016x}", out.model.meta.scenario_hash),
            infeasibility,
            safety: out.safety.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Builds the model for a scenario with the requested options applied.
pub fn build_for(scn: &Scenario, opts: &SolveOptions) -> Result<MilpModel, PipelineError> {
    let disc = opts.discretization(scn)?;
    let mut model = build_model(&scn.robots, &scn.conflicts, disc, opts.model)?;
    if !opts.force_priorities.is_empty() {
        force_priorities(&mut model, &opts.force_priorities)?;
    }
    Ok(model)
}

/// Binary assignment of the best solution under first-come-first-served
/// priorities (earlier entry time passes first, ties by id), or `None`
/// when that ordering is infeasible.
pub fn entry_order_hint(model: &MilpModel, limits: Limits) -> Result<Option<Vec<f64>>, PipelineError> {
    let mut sub = model.clone();
    for c in &model.conflicts {
        let pi = sub.id(VarIndex::Pi {
            conflict: c.id,
            leader: c.first(),
            follower: c.second(),
        });
        if sub.columns[pi].lower == sub.columns[pi].upper {
            continue;
        }
        let (a, b) = (sub.robot(c.first()).unwrap(), sub.robot(c.second()).unwrap());
        let leader = if (a.t_in, a.id) <= (b.t_in, b.id) { a.id } else { b.id };
        fix_priority(&mut sub, c.id, leader)?;
    }
    let report = solve_milp_with(&sub, limits, None)?;
    Ok(report.incumbent.map(|sol| {
        let mut values = sol.values;
        for c in model.binary_columns() {
            values[c] = values[c].round();
        }
        values
    }))
}

/// Solves a model and turns the result into verified trajectories.
pub fn solve_model(model: MilpModel, opts: &SolveOptions) -> Result<SolveOutcome, PipelineError> {
    let hint = if opts.warm_start {
        entry_order_hint(&model, opts.limits)?
    } else {
        None
    };
    let report = solve_milp_with(&model, opts.limits, hint.as_deref())?;
    finish(model, report, opts)
}

fn finish(model: MilpModel, report: SolveReport, opts: &SolveOptions) -> Result<SolveOutcome, PipelineError> {
    let Some(values) = report.values() else {
        return Ok(SolveOutcome {
            model,
            report,
            trajectories: Vec::new(),
            graph: PriorityGraph::default(),
            metrics: None,
            safety: None,
        });
    };
    let (trajectories, graph) = extract(&model, values)?;
    let dt = model.meta.tau / opts.verify_divisor;
    let safety = verify_safety(&trajectories, &model.robots, &model.conflicts, dt)?;
    if !safety.is_safe() {
        warn!("{} safety violations in the solution", safety.violation_count);
    }
    let mut m = metrics(&trajectories, &model.robots)?;
    m.min_clearance = safety.min_clearance.is_finite().then_some(safety.min_clearance);
    Ok(SolveOutcome {
        model,
        report,
        trajectories,
        graph,
        metrics: Some(m),
        safety: Some(safety),
    })
}

pub fn solve_scenario(scn: &Scenario, opts: &SolveOptions) -> Result<SolveOutcome, PipelineError> {
    let model = build_for(scn, opts)?;
    info!(
        "model: {} columns, {} rows, K = {}, tau = {}",
        model.columns.len(),
        model.rows.len(),
        model.meta.k,
        model.meta.tau
    );
    solve_model(model, opts)
}

/// Re-solves an infeasible scenario with a three times longer horizon to
/// tell a short horizon from an unsafe initial state.
pub fn diagnose_infeasibility(scn: &Scenario, opts: &SolveOptions) -> Result<InfeasibilityCause, PipelineError> {
    let mut longer = opts.clone();
    longer.horizon = Some(3.0 * opts.horizon.unwrap_or(scn.horizon));
    longer.warm_start = false;
    let model = build_for(scn, &longer)?;
    let report = solve_milp_with(&model, longer.limits, None)?;
    Ok(match report.status {
        SolveStatus::Optimal | SolveStatus::TimeoutWithIncumbent => InfeasibilityCause::HorizonTooShort,
        SolveStatus::Infeasible => InfeasibilityCause::UnsafeInitialState,
        SolveStatus::TimeoutNoIncumbent => InfeasibilityCause::Unknown,
    })
}

/// Robots grouped by entry time into consecutive windows of `window`
/// seconds, counted from the earliest entry.
pub fn batches(scn: &Scenario, window: f64) -> Vec<Vec<RobotId>> {
    let t0 = scn.robots.iter().map(|r| r.t_in).fold(f64::INFINITY, f64::min);
    let mut groups: std::collections::BTreeMap<u64, Vec<RobotId>> = Default::default();
    for r in &scn.robots {
        let slot = if window > 0.0 && window.is_finite() {
            ((r.t_in - t0) / window + 1e-9).floor() as u64
        } else {
            0
        };
        groups.entry(slot).or_default().push(r.id);
    }
    groups.into_values().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub batch: usize,
    pub robots: Vec<RobotId>,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub nodes: u64,
    pub wall_time: f64,
    pub pinned_columns: usize,
}

#[derive(Debug, Clone)]
pub struct RecedingOutcome {
    pub batches: Vec<BatchSummary>,
    /// Solve of the last batch, which covers every robot.
    pub last: SolveOutcome,
    /// Union of the priority graphs of all batches.
    pub graph: PriorityGraph,
}

impl RecedingOutcome {
    pub fn objective(&self) -> Option<f64> {
        self.last.objective()
    }
}

/// Solves the scenario batch by batch; each batch sees the earlier robots
/// with their trajectories pinned.
pub fn solve_receding(scn: &Scenario, window: f64, opts: &SolveOptions) -> Result<RecedingOutcome, PipelineError> {
    let disc = opts.discretization(scn)?;
    let groups = batches(scn, window);
    let mut included: Vec<RobotId> = Vec::new();
    let mut prev: Option<(MilpModel, Vec<f64>)> = None;
    let mut summaries = Vec::new();
    let mut graph = PriorityGraph::default();
    let mut last = None;
    for (b, group) in groups.iter().enumerate() {
        included.extend(group);
        let sub = scn.subset(&included);
        let mut model = build_model(&sub.robots, &sub.conflicts, disc, opts.model)?;
        let mut pinned = 0;
        if let Some((pm, pv)) = &prev {
            let new: BTreeSet<RobotId> = group.iter().copied().collect();
            pinned = fix_receding_horizon(&mut model, pm, pv, &new)?;
        }
        let forced: Vec<(RobotId, RobotId)> = opts
            .force_priorities
            .iter()
            .copied()
            .filter(|(a, b)| included.contains(a) && included.contains(b))
            .filter(|&(a, b)| {
                model
                    .conflicts
                    .iter()
                    .any(|c| (c.first(), c.second()) == (a, b) || (c.first(), c.second()) == (b, a))
            })
            .collect();
        if !forced.is_empty() {
            force_priorities(&mut model, &forced)?;
        }
        let outcome = solve_model(model, opts)?;
        summaries.push(BatchSummary {
            batch: b,
            robots: group.clone(),
            status: outcome.status(),
            objective: outcome.objective(),
            nodes: outcome.report.nodes,
            wall_time: outcome.report.wall_time,
            pinned_columns: pinned,
        });
        let Some(values) = outcome.report.values().map(|v| v.to_vec()) else {
            return Err(PipelineError::Batch {
                batch: b,
                status: outcome.status(),
            });
        };
        graph = graph.union(&outcome.graph);
        prev = Some((outcome.model.clone(), values));
        last = Some(outcome);
    }
    Ok(RecedingOutcome {
        batches: summaries,
        last: last.expect("at least one batch"),
        graph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{gen_abstract, Settings};

    fn small() -> Scenario {
        gen_abstract(
            3,
            2,
            4,
            Settings {
                tau: Some(0.5),
                horizon: Some(12.0),
                ..Settings::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn batches_split_by_window() {
        let scn = small();
        assert_eq!(batches(&scn, f64::INFINITY).len(), 1);
        let all: usize = batches(&scn, 0.5).iter().map(|g| g.len()).sum();
        assert_eq!(all, 3);
    }

    #[test]
    fn single_window_matches_joint_solve() {
        let scn = small();
        let opts = SolveOptions::default();
        let joint = solve_scenario(&scn, &opts).unwrap();
        let rec = solve_receding(&scn, 1e9, &opts).unwrap();
        assert_eq!(rec.batches.len(), 1);
        assert_eq!(joint.objective(), rec.objective());
    }
}
