//! Mixed-integer model of the coordination problem: columns, constraint
//! families and objective.

mod families;
mod receding;

pub use families::{
    add_monotonicity_cuts, generate_boundary_constraints, generate_indicator_constraints,
    generate_kinodynamic_constraints, generate_safety_constraints, set_objective,
};
pub use receding::fix_receding_horizon;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Conflict, GeometryError, RobotId, RobotSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate robot id {0}")]
    DuplicateRobot(RobotId),
    #[error("conflict {conflict} references unknown robot {robot}")]
    UnknownRobot { conflict: usize, robot: RobotId },
    #[error("duplicate conflict id {0}")]
    DuplicateConflict(usize),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("number of time steps must be at least 1")]
    InvalidSteps,
    #[error("no robots")]
    NoRobots,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("committed value {value} for {column} outside [{lower}, {upper}]")]
    InconsistentFix {
        column: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("committed robots overlap the new robots: {0}")]
    OverlappingBatches(RobotId),
    #[error("no conflict with id {0}")]
    UnknownConflict(usize),
    #[error("robots {0} and {1} share no conflict")]
    NoConflict(RobotId, RobotId),
    #[error("priorities {0}>{1} and {1}>{0} both requested")]
    ContradictoryPriorities(RobotId, RobotId),
}

/// Fixed time step and number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub tau: f64,
    pub k: u32,
}

impl Discretization {
    pub fn new(tau: f64, k: u32) -> Result<Self, ModelError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(ModelError::InvalidTau(tau));
        }
        if k == 0 {
            return Err(ModelError::InvalidSteps);
        }
        Ok(Self { tau, k })
    }

    /// Enough steps to cover the latest entry plus `horizon` seconds.
    pub fn covering(robots: &[RobotSpec], tau: f64, horizon: f64) -> Result<Self, ModelError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(ModelError::InvalidTau(tau));
        }
        let latest = robots.iter().map(|r| r.t_in).fold(0.0, f64::max);
        let k = ((latest + horizon) / tau - 1e-9).ceil().max(1.0) as u32;
        Self::new(tau, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Add the averaged normalized speed term to the objective.
    pub tie_break: bool,
    /// Add the monotonicity cuts on indicator variables.
    pub cuts: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            tie_break: true,
            cuts: true,
        }
    }
}

/// Which part of a completed collision set an indicator refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Par,
    Perp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bound {
    In,
    Out,
}

/// Role of the robot an indicator watches: the priority holder `I` or the
/// other robot `J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    I,
    J,
}

/// Identity of a model column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarIndex {
    S { robot: RobotId, k: u32 },
    V { robot: RobotId, k: u32 },
    Mu { robot: RobotId, k: u32 },
    Sigma { robot: RobotId, k: u32 },
    /// One when `leader` passes `conflict` before `follower`.
    Pi {
        conflict: usize,
        leader: RobotId,
        follower: RobotId,
    },
    /// Indicator for the zone of `conflict` under priority to `leader`.
    Eps {
        conflict: usize,
        leader: RobotId,
        part: Part,
        bound: Bound,
        side: Side,
        k: u32,
    },
}

impl VarIndex {
    pub fn is_binary(&self) -> bool {
        !matches!(self, VarIndex::S { .. } | VarIndex::V { .. })
    }

    pub fn step(&self) -> Option<u32> {
        match *self {
            VarIndex::S { k, .. }
            | VarIndex::V { k, .. }
            | VarIndex::Mu { k, .. }
            | VarIndex::Sigma { k, .. }
            | VarIndex::Eps { k, .. } => Some(k),
            VarIndex::Pi { .. } => None,
        }
    }

    /// Robot whose trajectory the column belongs to, for per-robot kinds.
    pub fn robot(&self) -> Option<RobotId> {
        match *self {
            VarIndex::S { robot, .. }
            | VarIndex::V { robot, .. }
            | VarIndex::Mu { robot, .. }
            | VarIndex::Sigma { robot, .. } => Some(robot),
            _ => None,
        }
    }
}

impl fmt::Display for VarIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarIndex::S { robot, k } => write!(f, "s_{robot}_{k}"),
            VarIndex::V { robot, k } => write!(f, "v_{robot}_{k}"),
            VarIndex::Mu { robot, k } => write!(f, "mu_{robot}_{k}"),
            VarIndex::Sigma { robot, k } => write!(f, "sigma_{robot}_{k}"),
            VarIndex::Pi {
                conflict,
                leader,
                follower,
            } => write!(f, "pi_{leader}_{follower}_{conflict}"),
            VarIndex::Eps {
                conflict,
                leader,
                part,
                bound,
                side,
                k,
            } => {
                let part = match part {
                    Part::Par => "par",
                    Part::Perp => "perp",
                };
                let bound = match bound {
                    Bound::In => "in",
                    Bound::Out => "out",
                };
                let side = match side {
                    Side::I => "i",
                    Side::J => "j",
                };
                write!(f, "eps_{part}_{bound}_{side}_{conflict}_{leader}_{k}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub index: VarIndex,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Constraint family a row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    H1,
    H2,
    H3,
    H4,
    HEps,
    H5,
    B1,
    B2,
    B3,
    B4,
    B5,
    K1,
    K2,
    K3,
    S1,
    S2,
    S3,
    Cut,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::H1 => "h1",
            Family::H2 => "h2",
            Family::H3 => "h3",
            Family::H4 => "h4",
            Family::HEps => "heps",
            Family::H5 => "h5",
            Family::B1 => "b1",
            Family::B2 => "b2",
            Family::B3 => "b3",
            Family::B4 => "b4",
            Family::B5 => "b5",
            Family::K1 => "k1",
            Family::K2 => "k2",
            Family::K3 => "k3",
            Family::S1 => "s1",
            Family::S2 => "s2",
            Family::S3 => "s3",
            Family::Cut => "cut",
        }
    }
}

/// Antecedent literal of an implication: column `col` takes value `active`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub col: usize,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub family: Family,
    /// Antecedent literals when the row is a big-M implication.
    pub literals: Vec<Literal>,
    /// Big-M coefficient applied per antecedent literal.
    pub big_m: f64,
}

impl LinearConstraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, a)| a * x[c]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub scenario_hash: u64,
    pub tau: f64,
    pub k: u32,
    pub n_robots: usize,
    pub options: ModelOptions,
}

/// Columns, rows and a maximization objective.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub columns: Vec<Column>,
    pub rows: Vec<LinearConstraint>,
    pub objective: Vec<(usize, f64)>,
    pub meta: ModelMeta,
    pub robots: Vec<RobotSpec>,
    pub conflicts: Vec<Conflict>,
    lookup: HashMap<VarIndex, usize>,
}

impl MilpModel {
    /// Empty model with no robots; mostly useful for tests of the solver.
    pub fn empty() -> Self {
        MilpModel {
            columns: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            meta: ModelMeta {
                scenario_hash: 0,
                tau: 1.0,
                k: 1,
                n_robots: 0,
                options: ModelOptions::default(),
            },
            robots: Vec::new(),
            conflicts: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    pub fn add_column(&mut self, index: VarIndex, lower: f64, upper: f64) -> usize {
        let binary = index.is_binary();
        let (lower, upper) = if binary { (0.0, 1.0) } else { (lower, upper) };
        self.add_raw_column(index, lower, upper, binary)
    }

    pub fn add_raw_column(&mut self, index: VarIndex, lower: f64, upper: f64, binary: bool) -> usize {
        let id = self.columns.len();
        self.columns.push(Column {
            index,
            lower,
            upper,
            binary,
        });
        let prev = self.lookup.insert(index, id);
        assert!(prev.is_none(), "column {index} added twice");
        id
    }

    pub fn col(&self, index: VarIndex) -> Option<usize> {
        self.lookup.get(&index).copied()
    }

    /// Column id of an index known to exist.
    pub fn id(&self, index: VarIndex) -> usize {
        self.lookup[&index]
    }

    pub fn add_row(
        &mut self,
        family: Family,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.rows.push(LinearConstraint {
            coeffs,
            sense,
            rhs,
            family,
            literals: Vec::new(),
            big_m: 0.0,
        });
        self.rows.len() - 1
    }

    fn min_max_activity(&self, expr: &[(usize, f64)]) -> (f64, f64) {
        expr.iter().fold((0.0, 0.0), |(lo, hi), &(c, a)| {
            let col = &self.columns[c];
            if a >= 0.0 {
                (lo + a * col.lower, hi + a * col.upper)
            } else {
                (lo + a * col.upper, hi + a * col.lower)
            }
        })
    }

    /// Adds `literals => expr (sense) rhs` as big-M rows, with `M` taken
    /// from the column bounds of `expr` and charged once per literal.
    /// Equalities become two rows.
    pub fn add_implication(
        &mut self,
        family: Family,
        literals: &[Literal],
        expr: &[(usize, f64)],
        sense: Sense,
        rhs: f64,
    ) {
        match sense {
            Sense::Eq => {
                self.add_implication(family, literals, expr, Sense::Le, rhs);
                self.add_implication(family, literals, expr, Sense::Ge, rhs);
            }
            Sense::Le | Sense::Ge => {
                let (lo, hi) = self.min_max_activity(expr);
                let m = match sense {
                    Sense::Le => (hi - rhs).max(0.0),
                    _ => (rhs - lo).max(0.0),
                };
                // Le: expr - M*sum(off) <= rhs;  Ge: expr + M*sum(off) >= rhs
                let sign = if sense == Sense::Le { -1.0 } else { 1.0 };
                let mut coeffs = expr.to_vec();
                let mut rhs = rhs;
                for lit in literals {
                    if lit.active {
                        // off = 1 - x
                        coeffs.push((lit.col, -sign * m));
                        rhs -= sign * m;
                    } else {
                        coeffs.push((lit.col, sign * m));
                    }
                }
                self.rows.push(LinearConstraint {
                    coeffs,
                    sense,
                    rhs,
                    family,
                    literals: literals.to_vec(),
                    big_m: m,
                });
            }
        }
    }

    pub fn binary_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.binary)
            .map(|(i, _)| i)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(c, a)| a * x[c]).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .columns
            .iter()
            .zip(x)
            .map(|(c, &v)| (c.lower - v).max(v - c.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn max_integrality_violation(&self, x: &[f64]) -> f64 {
        self.binary_columns()
            .map(|c| (x[c] - x[c].round()).abs())
            .fold(0.0, f64::max)
    }

    pub fn robot(&self, id: RobotId) -> Option<&RobotSpec> {
        self.robots.iter().find(|r| r.id == id)
    }

    /// Number of rows per family, in family order.
    pub fn family_counts(&self) -> Vec<(Family, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for r in &self.rows {
            *counts.entry(r.family).or_insert(0) += 1;
        }
        counts.into_iter().collect()
    }
}

/// Stable 64-bit FNV-1a hash.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn scenario_hash(robots: &[RobotSpec], conflicts: &[Conflict]) -> u64 {
    let mut text = String::new();
    for r in robots {
        text.push_str(&format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{:?};",
            r.id, r.s_out, r.t_in, r.v_in, r.v_out, r.v_max, r.a_min, r.a_max, r.s_init
        ));
    }
    for c in conflicts {
        text.push_str(&serde_json::to_string(c).unwrap_or_default());
    }
    fnv1a(text.as_bytes())
}

/// Pins the priority columns of conflict `conflict` so that `leader`
/// passes first.
pub fn fix_priority(model: &mut MilpModel, conflict: usize, leader: RobotId) -> Result<(), ModelError> {
    let c = model
        .conflicts
        .iter()
        .find(|c| c.id == conflict)
        .ok_or(ModelError::UnknownConflict(conflict))?;
    let follower = if c.first() == leader {
        c.second()
    } else if c.second() == leader {
        c.first()
    } else {
        return Err(ModelError::UnknownRobot { conflict, robot: leader });
    };
    for (l, f, v) in [(leader, follower, 1.0), (follower, leader, 0.0)] {
        let col = model.id(VarIndex::Pi {
            conflict,
            leader: l,
            follower: f,
        });
        model.columns[col].lower = v;
        model.columns[col].upper = v;
    }
    Ok(())
}

/// Pins priorities for every conflict between each `(leader, follower)`
/// pair. Returns the number of conflicts affected.
pub fn force_priorities(model: &mut MilpModel, pairs: &[(RobotId, RobotId)]) -> Result<usize, ModelError> {
    for &(a, b) in pairs {
        if pairs.contains(&(b, a)) {
            return Err(ModelError::ContradictoryPriorities(a, b));
        }
    }
    let mut count = 0;
    for &(leader, follower) in pairs {
        let ids: Vec<usize> = model
            .conflicts
            .iter()
            .filter(|c| {
                (c.first(), c.second()) == (leader, follower) || (c.first(), c.second()) == (follower, leader)
            })
            .map(|c| c.id)
            .collect();
        if ids.is_empty() {
            return Err(ModelError::NoConflict(leader, follower));
        }
        for id in ids {
            fix_priority(model, id, leader)?;
            count += 1;
        }
    }
    Ok(count)
}

/// Position of robot `r` at step 0.
pub fn initial_abscissa(r: &RobotSpec) -> f64 {
    r.initial_position() - r.v_in * r.t_in
}

/// Builds the complete model: columns, all constraint families, objective
/// and (when enabled) the monotonicity cuts.
pub fn build_model(
    robots: &[RobotSpec],
    conflicts: &[Conflict],
    disc: Discretization,
    options: ModelOptions,
) -> Result<MilpModel, ModelError> {
    let disc = Discretization::new(disc.tau, disc.k)?;
    if robots.is_empty() {
        return Err(ModelError::NoRobots);
    }
    let mut ids = BTreeSet::new();
    for r in robots {
        r.validate()?;
        if !ids.insert(r.id) {
            return Err(ModelError::DuplicateRobot(r.id));
        }
    }
    let mut conflict_ids = BTreeSet::new();
    for c in conflicts {
        c.validate()?;
        if !conflict_ids.insert(c.id) {
            return Err(ModelError::DuplicateConflict(c.id));
        }
        for robot in [c.first(), c.second()] {
            if !ids.contains(&robot) {
                return Err(ModelError::UnknownRobot {
                    conflict: c.id,
                    robot,
                });
            }
        }
    }

    let mut model = MilpModel::empty();
    model.meta = ModelMeta {
        scenario_hash: scenario_hash(robots, conflicts),
        tau: disc.tau,
        k: disc.k,
        n_robots: robots.len(),
        options,
    };
    model.robots = robots.to_vec();
    model.conflicts = conflicts.to_vec();

    let horizon = disc.k as f64 * disc.tau;
    for r in robots {
        let s_lo = initial_abscissa(r).min(0.0);
        let s_hi = r.s_out + r.v_max * horizon;
        for k in 0..=disc.k {
            let robot = r.id;
            model.add_column(VarIndex::S { robot, k }, s_lo, s_hi);
            model.add_column(VarIndex::V { robot, k }, 0.0, r.v_max);
            model.add_column(VarIndex::Mu { robot, k }, 0.0, 1.0);
            model.add_column(VarIndex::Sigma { robot, k }, 0.0, 1.0);
        }
    }
    for c in conflicts {
        let (a, b) = (c.first(), c.second());
        model.add_column(
            VarIndex::Pi {
                conflict: c.id,
                leader: a,
                follower: b,
            },
            0.0,
            1.0,
        );
        model.add_column(
            VarIndex::Pi {
                conflict: c.id,
                leader: b,
                follower: a,
            },
            0.0,
            1.0,
        );
    }
    for c in conflicts {
        for k in 0..=disc.k {
            for leader in [c.first(), c.second()] {
                for (part, bound, side) in EPS_ROLES {
                    model.add_column(
                        VarIndex::Eps {
                            conflict: c.id,
                            leader,
                            part,
                            bound,
                            side,
                            k,
                        },
                        0.0,
                        1.0,
                    );
                }
            }
        }
    }

    generate_indicator_constraints(&mut model);
    generate_boundary_constraints(&mut model);
    generate_kinodynamic_constraints(&mut model);
    generate_safety_constraints(&mut model);
    set_objective(&mut model, options.tie_break);
    if options.cuts {
        add_monotonicity_cuts(&mut model);
    }
    Ok(model)
}

/// The four indicators used per priority direction.
pub const EPS_ROLES: [(Part, Bound, Side); 4] = [
    (Part::Perp, Bound::Out, Side::I),
    (Part::Perp, Bound::In, Side::J),
    (Part::Par, Bound::In, Side::J),
    (Part::Par, Bound::Out, Side::I),
];
