use highs::{Col, HighsModelStatus, RowProblem, Sense};

use super::{MilpError, WorkingProblem};
use crate::model::MilpModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of one relaxation solve. The simplex basis itself stays inside
/// the [`LpEngine`] that produced it and seeds the next solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Row activities in the order of the engine's rows.
    pub row_activities: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
}

/// Persistent dual-simplex relaxation engine. Bound changes keep the
/// previous optimal basis, so re-solves after branching are warm.
pub struct LpEngine {
    model: Option<highs::Model>,
    cols: Vec<Col>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    row_bounds: Vec<(f64, f64)>,
    row_coeffs: Vec<Vec<(usize, f64)>>,
    pub solves: u64,
}

impl LpEngine {
    /// Builds the relaxation of `problem` (binaries continuous in their
    /// bounds).
    pub fn new(problem: &WorkingProblem) -> Self {
        let mut pb = RowProblem::default();
        let cols: Vec<Col> = (0..problem.num_cols())
            .map(|c| pb.add_column(problem.objective[c], problem.lower[c]..=problem.upper[c]))
            .collect();
        for row in &problem.rows {
            let factors: Vec<(Col, f64)> = row.coeffs.iter().map(|&(c, a)| (cols[c], a)).collect();
            match (row.lo.is_finite(), row.hi.is_finite()) {
                (true, true) => pb.add_row(row.lo..=row.hi, &factors),
                (true, false) => pb.add_row(row.lo.., &factors),
                (false, true) => pb.add_row(..=row.hi, &factors),
                (false, false) => pb.add_row::<f64, _, _, _>(.., &factors),
            }
        }
        let mut model = pb.optimise(Sense::Maximise);
        model.make_quiet();
        model.set_option("presolve", "off");
        model.set_option("threads", 1);
        model.set_option("random_seed", 0);
        LpEngine {
            model: Some(model),
            cols,
            lower: problem.lower.clone(),
            upper: problem.upper.clone(),
            objective: problem.objective.clone(),
            row_bounds: problem.rows.iter().map(|r| (r.lo, r.hi)).collect(),
            row_coeffs: problem.rows.iter().map(|r| r.coeffs.clone()).collect(),
            solves: 0,
        }
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    /// Moves the engine's column bounds to the given box, touching only
    /// the columns that differ.
    pub fn set_bounds(&mut self, lower: &[f64], upper: &[f64]) {
        let model = self.model.as_mut().expect("engine model present");
        for c in 0..self.cols.len() {
            if lower[c] != self.lower[c] || upper[c] != self.upper[c] {
                model.change_column_bounds(self.cols[c], lower[c]..=upper[c]);
                self.lower[c] = lower[c];
                self.upper[c] = upper[c];
            }
        }
    }

    pub fn set_time_limit(&mut self, seconds: f64) {
        if let Some(m) = self.model.as_mut() {
            m.set_option("time_limit", seconds.max(1e-3));
        }
    }

    pub fn solve(&mut self) -> Result<LpSolution, MilpError> {
        let model = self.model.take().expect("engine model present");
        let solved = model
            .try_solve()
            .map_err(|e| MilpError::Engine(format!("{e:?}")))?;
        self.solves += 1;
        let status = solved.status();
        let result = match status {
            HighsModelStatus::Optimal => {
                let sol = solved.get_solution();
                let values = sol.columns().to_vec();
                let objective = self.objective.iter().zip(&values).map(|(a, v)| a * v).sum();
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    values,
                    objective,
                    row_activities: sol.rows().to_vec(),
                    row_duals: sol.dual_rows().to_vec(),
                    reduced_costs: sol.dual_columns().to_vec(),
                })
            }
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
                Ok(self.empty(LpStatus::Infeasible))
            }
            HighsModelStatus::Unbounded => Ok(self.empty(LpStatus::Unbounded)),
            other => Err(MilpError::Engine(format!("unexpected LP status {other:?}"))),
        };
        self.model = Some(solved.into());
        result
    }

    fn empty(&self, status: LpStatus) -> LpSolution {
        LpSolution {
            status,
            values: Vec::new(),
            objective: f64::NEG_INFINITY,
            row_activities: Vec::new(),
            row_duals: Vec::new(),
            reduced_costs: Vec::new(),
        }
    }

    /// Largest complementary-slackness product over rows and columns of an
    /// optimal solution.
    pub fn complementary_slackness(&self, sol: &LpSolution) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, &(lo, hi)) in self.row_bounds.iter().enumerate() {
            let act: f64 = self.row_coeffs[r]
                .iter()
                .map(|&(c, a)| a * sol.values[c])
                .sum();
            let gap = (act - lo).abs().min((hi - act).abs());
            worst = worst.max(sol.row_duals[r].abs() * gap.min(1e6));
        }
        for c in 0..self.cols.len() {
            let x = sol.values[c];
            let gap = (x - self.lower[c]).abs().min((self.upper[c] - x).abs());
            worst = worst.max(sol.reduced_costs[c].abs() * gap);
        }
        worst
    }
}

/// Solves the relaxation of `model` with its own column bounds.
pub fn solve_lp(model: &MilpModel) -> Result<LpSolution, MilpError> {
    if model.columns.is_empty() {
        return Err(MilpError::EmptyModel);
    }
    let problem = WorkingProblem::from_model(model);
    LpEngine::new(&problem).solve()
}
