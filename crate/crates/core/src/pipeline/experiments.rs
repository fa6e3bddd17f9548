use std::fmt::Write as _;
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

use super::plot::{spearman, LineChart, Series};
use super::{build_for, solve_model, PipelineError, SolveOptions};
use crate::milp::{export_model, ExportFormat, Limits, SolveStatus};
use crate::scenario::{gen_fixed_count, ArrivalModel, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct TimestepConfig {
    pub instances: usize,
    pub vehicles: usize,
    /// Ascending; the first is the baseline.
    pub taus: Vec<f64>,
    pub seed: u64,
    pub horizon: f64,
    /// Per sub-solve.
    pub time_limit: Option<f64>,
    pub arrivals: ArrivalModel,
}

impl Default for TimestepConfig {
    fn default() -> Self {
        TimestepConfig {
            instances: 20,
            vehicles: 5,
            taus: vec![0.25, 0.5, 1.0, 2.0],
            seed: 0,
            horizon: 30.0,
            time_limit: Some(120.0),
            arrivals: ArrivalModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimestepRow {
    pub instance: usize,
    pub seed: u64,
    pub tau: f64,
    pub mean_sojourn: f64,
    pub loss: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSummary {
    pub tau: f64,
    pub mean_loss: f64,
    pub std_loss: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimestepResult {
    pub rows: Vec<TimestepRow>,
    pub summary: Vec<TauSummary>,
    /// Instances dropped because a sub-solve did not finish.
    pub dropped: Vec<usize>,
    /// Least-squares slope of mean loss against tau.
    pub slope: f64,
    pub spearman: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, _) = mean_std(xs);
    let (my, _) = mean_std(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

fn check_ascending(values: &[f64], what: &str) -> Result<(), PipelineError> {
    if values.is_empty() || values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PipelineError::Usage(format!("{what} must be nonempty and strictly ascending")));
    }
    Ok(())
}

/// Relative loss of the optimal mean sojourn time at each step against the
/// finest step.
pub fn exp_timestep(cfg: &TimestepConfig, base: &SolveOptions) -> Result<TimestepResult, PipelineError> {
    check_ascending(&cfg.taus, "taus")?;
    if cfg.taus[0] <= 0.0 {
        return Err(PipelineError::Usage("taus must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    'instances: for i in 0..cfg.instances {
        let seed = cfg.seed.wrapping_add(i as u64);
        let scn = gen_fixed_count(&cfg.arrivals, cfg.vehicles, seed)?;
        let mut sojourns = Vec::new();
        for &tau in &cfg.taus {
            let opts = SolveOptions {
                tau: Some(tau),
                horizon: Some(cfg.horizon),
                limits: Limits {
                    time_limit: cfg.time_limit,
                    ..base.limits
                },
                ..base.clone()
            };
            let out = solve_model(build_for(&scn, &opts)?, &opts)?;
            match (out.status(), &out.metrics) {
                (SolveStatus::Optimal, Some(m)) => sojourns.push((tau, m.mean_sojourn, out.report.wall_time)),
                (status, _) => {
                    warn!("instance {i} (seed {seed}) dropped: tau {tau} ended {status:?}");
                    dropped.push(i);
                    continue 'instances;
                }
            }
        }
        let t_base = sojourns[0].1;
        for (tau, t, wall) in sojourns {
            rows.push(TimestepRow {
                instance: i,
                seed,
                tau,
                mean_sojourn: t,
                loss: if tau == cfg.taus[0] { 0.0 } else { (t - t_base) / t_base },
                wall_time: wall,
            });
        }
        info!("instance {i} done");
    }
    let summary: Vec<TauSummary> = cfg
        .taus
        .iter()
        .map(|&tau| {
            let losses: Vec<f64> = rows.iter().filter(|r| r.tau == tau).map(|r| r.loss).collect();
            let (mean_loss, std_loss) = mean_std(&losses);
            TauSummary {
                tau,
                mean_loss,
                std_loss,
                count: losses.len(),
            }
        })
        .collect();
    let xs: Vec<f64> = summary.iter().map(|s| s.tau).collect();
    let ys: Vec<f64> = summary.iter().map(|s| s.mean_loss).collect();
    Ok(TimestepResult {
        slope: slope(&xs, &ys),
        spearman: spearman(&xs, &ys),
        rows,
        summary,
        dropped,
    })
}

impl TimestepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("instance,seed,tau,mean_sojourn,loss,wall_time\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.instance, r.seed, r.tau, r.mean_sojourn, r.loss, r.wall_time
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("tau,mean_loss,std_loss,count\n");
        for r in &self.summary {
            let _ = writeln!(s, "{},{},{},{}", r.tau, r.mean_loss, r.std_loss, r.count);
        }
        s
    }

    pub fn to_svg(&self) -> String {
        LineChart {
            title: format!("Relative loss vs time step (slope {:.4} per s)", self.slope),
            x_label: "time step [s]".into(),
            y_label: "relative loss [%]".into(),
            series: vec![Series {
                name: "mean ± 1 std".into(),
                points: self
                    .summary
                    .iter()
                    .filter(|s| s.count > 0)
                    .map(|s| (s.tau, 100.0 * s.mean_loss, 100.0 * s.std_loss))
                    .collect(),
            }],
        }
        .render()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    /// Ascending.
    pub counts: Vec<usize>,
    pub tau: f64,
    pub horizon: f64,
    pub instances: usize,
    pub seed: u64,
    pub time_limit: Option<f64>,
    pub arrivals: ArrivalModel,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            counts: vec![1, 2, 3, 4],
            tau: 1.0,
            horizon: 30.0,
            instances: 10,
            seed: 0,
            time_limit: Some(60.0),
            arrivals: ArrivalModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub vehicles: usize,
    pub instance: usize,
    pub seed: u64,
    pub status: SolveStatus,
    /// Solve time; a timeout is a censored observation at the limit.
    pub wall_time: f64,
    /// Model build plus MPS export.
    pub export_time: f64,
    pub nodes: u64,
    pub columns: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeResult {
    pub rows: Vec<RuntimeRow>,
    /// `(vehicles, mean wall time, mean export time, censored count)`.
    pub summary: Vec<(usize, f64, f64, usize)>,
}

impl RuntimeResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("vehicles,instance,seed,status,wall_time,export_time,nodes,columns,rows\n");
        for r in &self.rows {
            let status = serde_json::to_value(r.status).unwrap();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.vehicles,
                r.instance,
                r.seed,
                status.as_str().unwrap_or(""),
                r.wall_time,
                r.export_time,
                r.nodes,
                r.columns,
                r.rows
            );
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("vehicles,mean_wall_time,mean_export_time,censored\n");
        for (n, w, e, c) in &self.summary {
            let _ = writeln!(s, "{n},{w},{e},{c}");
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let by_n = |f: &dyn Fn(&RuntimeRow) -> f64| -> Vec<(f64, f64, f64)> {
            self.summary
                .iter()
                .map(|(n, ..)| {
                    let xs: Vec<f64> = self.rows.iter().filter(|r| r.vehicles == *n).map(f).collect();
                    let (m, s) = mean_std(&xs);
                    (*n as f64, m, s)
                })
                .collect()
        };
        LineChart {
            title: "Average computation time".into(),
            x_label: "vehicles".into(),
            y_label: "time [s]".into(),
            series: vec![
                Series {
                    name: "built-in solve".into(),
                    points: by_n(&|r| r.wall_time),
                },
                Series {
                    name: "build + export".into(),
                    points: by_n(&|r| r.export_time),
                },
            ],
        }
        .render()
    }
}

/// Time to build a model and write it as MPS.
pub fn export_time(scn: &Scenario, opts: &SolveOptions) -> Result<f64, PipelineError> {
    let start = Instant::now();
    let model = build_for(scn, opts)?;
    let mut sink = Vec::new();
    export_model(&model, ExportFormat::Mps, &mut sink)?;
    Ok(start.elapsed().as_secs_f64())
}

pub fn exp_runtime(cfg: &RuntimeConfig, base: &SolveOptions) -> Result<RuntimeResult, PipelineError> {
    check_ascending(&cfg.counts.iter().map(|&n| n as f64).collect::<Vec<_>>(), "counts")?;
    let opts = SolveOptions {
        tau: Some(cfg.tau),
        horizon: Some(cfg.horizon),
        limits: Limits {
            time_limit: cfg.time_limit,
            ..base.limits
        },
        ..base.clone()
    };
    let mut rows = Vec::new();
    for &n in &cfg.counts {
        for i in 0..cfg.instances {
            let seed = cfg.seed.wrapping_add(i as u64);
            let scn = gen_fixed_count(&cfg.arrivals, n, seed)?;
            let export_time = export_time(&scn, &opts)?;
            let model = build_for(&scn, &opts)?;
            let (columns, nrows) = (model.columns.len(), model.rows.len());
            let out = solve_model(model, &opts)?;
            info!("N = {n} instance {i}: {:?} in {:.3} s", out.status(), out.report.wall_time);
            rows.push(RuntimeRow {
                vehicles: n,
                instance: i,
                seed,
                status: out.status(),
                wall_time: out.report.wall_time,
                export_time,
                nodes: out.report.nodes,
                columns,
                rows: nrows,
            });
        }
    }
    let summary = cfg
        .counts
        .iter()
        .map(|&n| {
            let mine: Vec<&RuntimeRow> = rows.iter().filter(|r| r.vehicles == n).collect();
            let wall: Vec<f64> = mine.iter().map(|r| r.wall_time).collect();
            let export: Vec<f64> = mine.iter().map(|r| r.export_time).collect();
            let censored = mine
                .iter()
                .filter(|r| matches!(r.status, SolveStatus::TimeoutWithIncumbent | SolveStatus::TimeoutNoIncumbent))
                .count();
            (n, mean_std(&wall).0, mean_std(&export).0, censored)
        })
        .collect();
    Ok(RuntimeResult { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_and_moments() {
        assert!((slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-12);
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn rejects_unsorted_taus() {
        let cfg = TimestepConfig {
            taus: vec![1.0, 0.5],
            ..TimestepConfig::default()
        };
        assert!(matches!(
            exp_timestep(&cfg, &SolveOptions::default()),
            Err(PipelineError::Usage(_))
        ));
    }

    #[test]
    fn tiny_timestep_run_has_zero_baseline_loss() {
        let cfg = TimestepConfig {
            instances: 1,
            vehicles: 2,
            taus: vec![0.5, 1.0],
            seed: 4,
            ..TimestepConfig::default()
        };
        let r = exp_timestep(&cfg, &SolveOptions::default()).unwrap();
        assert!(r.rows.iter().filter(|r| r.tau == 0.5).all(|r| r.loss == 0.0));
        assert!(r.to_csv().starts_with("instance,seed,tau"));
        assert!(r.to_svg().contains("<svg"));
    }
}
