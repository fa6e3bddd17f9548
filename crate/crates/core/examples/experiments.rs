//! Small runs of the time-step and runtime experiments.

use pathcoord::pipeline::{exp_runtime, exp_timestep, RuntimeConfig, SolveOptions, TimestepConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = SolveOptions::default();
    let ts = exp_timestep(
        &TimestepConfig {
            instances: 3,
            vehicles: 3,
            ..TimestepConfig::default()
        },
        &base,
    )?;
    print!("{}", ts.summary_csv());
    println!("spearman {:.3}, slope {:.4} per s", ts.spearman, ts.slope);

    let rt = exp_runtime(
        &RuntimeConfig {
            counts: vec![1, 2, 3],
            instances: 2,
            ..RuntimeConfig::default()
        },
        &base,
    )?;
    print!("{}", rt.summary_csv());
    Ok(())
}
