use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pathcoord::milp::{export_model, ExportFormat, Limits, SolveStatus};
use pathcoord::model::ModelOptions;
use pathcoord::pipeline::{
    diagnose_infeasibility, exp_runtime, exp_timestep, solve_receding, solve_scenario, ReportJson, RuntimeConfig,
    SolveOptions, SolveOutcome, TimestepConfig,
};
use pathcoord::scenario::{gen_abstract, gen_fixed_count, gen_scenario, ArrivalModel, Scenario, Settings};
use pathcoord::trajectory::{parse_priorities, read_trajectories_csv, trajectories_csv, verify_safety};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;
const EXIT_TIMEOUT_EMPTY: u8 = 4;

#[derive(Parser)]
#[command(name = "pathcoord", version, about = "Time-optimal coordination of robots on fixed paths")]
struct Cli {
    /// Worker threads for parallel parts (oracle, experiments).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Solver {
    Builtin,
    ExportOnly,
}

#[derive(Args, Clone)]
struct Common {
    /// Time step in seconds (overrides the scenario).
    #[arg(long)]
    tau: Option<f64>,
    /// Planning horizon in seconds (overrides the scenario).
    #[arg(long)]
    horizon: Option<f64>,
    /// Fixed priorities like `1>3,3>2`.
    #[arg(long, value_name = "LIST")]
    force_priorities: Option<String>,
    /// Drop the speed tie-break term from the objective.
    #[arg(long)]
    no_tiebreak: bool,
    /// Drop the monotonicity cuts.
    #[arg(long)]
    no_cuts: bool,
    /// Wall-clock limit per solve, seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, value_enum, default_value = "builtin")]
    solver: Solver,
    /// Seed the search with the first-come-first-served solution.
    #[arg(long)]
    warm_start: bool,
}

impl Common {
    fn options(&self) -> Result<SolveOptions, String> {
        let force = match &self.force_priorities {
            Some(text) => parse_priorities(text)?,
            None => Vec::new(),
        };
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return Err(format!("--time-limit must be positive, got {t}"));
            }
        }
        Ok(SolveOptions {
            tau: self.tau,
            horizon: self.horizon,
            force_priorities: force,
            model: ModelOptions {
                tie_break: !self.no_tiebreak,
                cuts: !self.no_cuts,
            },
            limits: Limits {
                time_limit: self.time_limit,
                ..Limits::default()
            },
            warm_start: self.warm_start,
            ..SolveOptions::default()
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a scenario; prints metrics JSON.
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Write the trajectories as CSV.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Write the solve report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// With `--solver export-only`: where to write the MPS file.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Check trajectories from a CSV file against a scenario.
    Verify {
        scenario: PathBuf,
        trajectories: PathBuf,
        /// Sampling step; defaults to a twentieth of the step.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Solve in batches of robots grouped by entry time.
    Receding {
        scenario: PathBuf,
        /// Entry-time window per batch, seconds.
        #[arg(long, default_value_t = 5.0)]
        window: f64,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Generate a random scenario.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Intersection traffic over this many seconds.
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
        /// Exactly this many vehicles instead of a duration.
        #[arg(long)]
        count: Option<usize>,
        /// Arrivals per second on each route.
        #[arg(long)]
        rate: Option<f64>,
        /// Abstract scenario with this many robots.
        #[arg(long, value_name = "N")]
        r#abstract: Option<usize>,
        /// Zones of an abstract scenario.
        #[arg(long, default_value_t = 3)]
        zones: usize,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write the model as MPS or LP text.
    Export {
        scenario: PathBuf,
        #[arg(long, default_value = "mps")]
        format: String,
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Relative loss of the optimum against the time step.
    ExpTimestep {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 5)]
        vehicles: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 2.0])]
        taus: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Solver wall time against the number of vehicles.
    ExpRuntime {
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4])]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

type CmdResult = Result<u8, Box<dyn std::error::Error>>;

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::TimeoutWithIncumbent => EXIT_TIMEOUT,
        SolveStatus::TimeoutNoIncumbent => EXIT_TIMEOUT_EMPTY,
    }
}

fn write_out(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            other => other,
        },
    }
}

fn emit(text: &str) -> std::io::Result<()> {
    write_out(None, &format!("{text}\n"))
}

fn print_outcome(out: &SolveOutcome, trajectories: Option<&Path>) -> std::io::Result<()> {
    if let Some(path) = trajectories {
        fs::write(path, trajectories_csv(&out.trajectories))?;
    }
    match &out.metrics {
        Some(m) => emit(&m.to_json())?,
        None => eprintln!("no solution: {:?}", out.status()),
    }
    Ok(())
}

fn export(scn: &Scenario, opts: &SolveOptions, format: ExportFormat, out: Option<&Path>) -> CmdResult {
    let model = pathcoord::pipeline::build_for(scn, opts)?;
    let mut buf = Vec::new();
    export_model(&model, format, &mut buf)?;
    write_out(out, std::str::from_utf8(&buf)?)?;
    Ok(EXIT_OK)
}

fn run(cmd: Cmd) -> CmdResult {
    match cmd {
        Cmd::Solve {
            scenario,
            common,
            trajectories,
            report,
            export: export_path,
        } => {
            let scn = Scenario::load(&scenario)?;
            let opts = common.options()?;
            if common.solver == Solver::ExportOnly {
                return export(&scn, &opts, ExportFormat::Mps, export_path.as_deref());
            }
            let out = solve_scenario(&scn, &opts)?;
            let cause = if out.status() == SolveStatus::Infeasible {
                let cause = diagnose_infeasibility(&scn, &opts)?;
                eprintln!("infeasible: {cause:?}");
                Some(cause)
            } else {
                None
            };
            if let Some(path) = report {
                fs::write(path, ReportJson::new(&out, cause).to_json())?;
            }
            print_outcome(&out, trajectories.as_deref())?;
            if let Some(s) = &out.safety {
                if !s.is_safe() {
                    eprintln!("warning: {} safety violations", s.violation_count);
                }
            }
            Ok(status_code(out.status()))
        }
        Cmd::Verify {
            scenario,
            trajectories,
            dt,
        } => {
            let scn = Scenario::load(&scenario)?;
            let trajs = read_trajectories_csv(&fs::read_to_string(&trajectories)?)?;
            let tau = trajs.iter().map(|t| t.tau).fold(f64::INFINITY, f64::min);
            let report = verify_safety(&trajs, &scn.robots, &scn.conflicts, dt.unwrap_or(tau / 20.0))?;
            emit(&serde_json::to_string_pretty(&report)?)?;
            Ok(if report.is_safe() { EXIT_OK } else { EXIT_INFEASIBLE })
        }
        Cmd::Receding {
            scenario,
            window,
            common,
            trajectories,
        } => {
            let scn = Scenario::load(&scenario)?;
            let opts = common.options()?;
            if common.solver == Solver::ExportOnly {
                return Err("receding solves need the built-in solver".into());
            }
            let out = match solve_receding(&scn, window, &opts) {
                Ok(out) => out,
                Err(pathcoord::pipeline::PipelineError::Batch { batch, status }) => {
                    eprintln!("batch {batch} ended with {status:?}");
                    return Ok(status_code(status));
                }
                Err(e) => return Err(e.into()),
            };
            for b in &out.batches {
                eprintln!("{}", serde_json::to_string(b)?);
            }
            if !out.graph.is_acyclic() {
                eprintln!("warning: combined priority graph has a cycle");
            }
            print_outcome(&out.last, trajectories.as_deref())?;
            let worst = out.batches.iter().map(|b| status_code(b.status)).max().unwrap_or(EXIT_OK);
            Ok(worst)
        }
        Cmd::Gen {
            seed,
            duration,
            count,
            rate,
            r#abstract,
            zones,
            tau,
            horizon,
            out,
        } => {
            let settings = Settings {
                tau,
                horizon,
                ..Settings::default()
            };
            let scn = if let Some(n) = r#abstract {
                gen_abstract(n, zones, seed, settings)?
            } else {
                let mut model = ArrivalModel {
                    settings,
                    ..ArrivalModel::default()
                };
                if let Some(r) = rate {
                    model.rate = r;
                }
                match count {
                    Some(n) => gen_fixed_count(&model, n, seed)?,
                    None => gen_scenario(&model, duration, seed)?,
                }
            };
            write_out(out.as_deref(), &scn.to_toml())?;
            Ok(EXIT_OK)
        }
        Cmd::Export {
            scenario,
            format,
            common,
            out,
        } => {
            let scn = Scenario::load(&scenario)?;
            let format: ExportFormat = format.parse()?;
            export(&scn, &common.options()?, format, out.as_deref())
        }
        Cmd::ExpTimestep {
            instances,
            vehicles,
            taus,
            seed,
            horizon,
            time_limit,
            out_dir,
        } => {
            let cfg = TimestepConfig {
                instances,
                vehicles,
                taus,
                seed,
                horizon,
                time_limit: time_limit.or(TimestepConfig::default().time_limit),
                ..TimestepConfig::default()
            };
            let result = exp_timestep(&cfg, &SolveOptions::default())?;
            fs::create_dir_all(&out_dir)?;
            fs::write(out_dir.join("timestep.csv"), result.to_csv())?;
            fs::write(out_dir.join("timestep_summary.csv"), result.summary_csv())?;
            fs::write(out_dir.join("timestep.svg"), result.to_svg())?;
            write_out(None, &result.summary_csv())?;
            emit(&format!("slope,{}\nspearman,{}", result.slope, result.spearman))?;
            if !result.dropped.is_empty() {
                eprintln!("dropped instances: {:?}", result.dropped);
            }
            Ok(EXIT_OK)
        }
        Cmd::ExpRuntime {
            counts,
            tau,
            horizon,
            instances,
            seed,
            time_limit,
            out_dir,
        } => {
            let cfg = RuntimeConfig {
                counts,
                tau,
                horizon,
                instances,
                seed,
                time_limit: Some(time_limit),
                ..RuntimeConfig::default()
            };
            let result = exp_runtime(&cfg, &SolveOptions::default())?;
            fs::create_dir_all(&out_dir)?;
            fs::write(out_dir.join("runtime.csv"), result.to_csv())?;
            fs::write(out_dir.join("runtime_summary.csv"), result.summary_csv())?;
            fs::write(out_dir.join("runtime.svg"), result.to_svg())?;
            write_out(None, &result.summary_csv())?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
