//! Plans four robots in two arrival batches, pinning the first batch while
//! the second is planned, and compares with the joint solve.

use pathcoord::pipeline::{solve_receding, solve_scenario, SolveOptions};
use pathcoord::scenario::{gen_abstract, Settings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scn = gen_abstract(
        4,
        3,
        3,
        Settings {
            tau: Some(0.5),
            horizon: Some(14.0),
            ..Settings::default()
        },
    )?;
    let opts = SolveOptions::default();
    let rec = solve_receding(&scn, 1.5, &opts)?;
    for b in &rec.batches {
        println!(
            "batch {}: robots {:?}, {:?}, {} pinned columns, {:.2} s",
            b.batch, b.robots, b.status, b.pinned_columns, b.wall_time
        );
    }
    let joint = solve_scenario(&scn, &opts)?;
    let mean = |m: Option<&pathcoord::trajectory::Metrics>| m.map(|m| m.mean_sojourn);
    println!("batched mean sojourn {:?}", mean(rec.last.metrics.as_ref()));
    println!("joint mean sojourn   {:?}", mean(joint.metrics.as_ref()));
    Ok(())
}
