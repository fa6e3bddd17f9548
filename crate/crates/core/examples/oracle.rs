//! Cross-checks branch and bound against solving every priority assignment.

use pathcoord::milp::{solve_milp, Limits};
use pathcoord::pipeline::{build_for, SolveOptions};
use pathcoord::scenario::{gen_abstract, Settings};
use pathcoord::trajectory::enumerate_priorities_oracle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let opts = SolveOptions::default();
    for seed in 0..5 {
        let scn = gen_abstract(
            3,
            3,
            seed,
            Settings {
                tau: Some(0.5),
                horizon: Some(12.0),
                ..Settings::default()
            },
        )?;
        let model = build_for(&scn, &opts)?;
        let bnb = solve_milp(&model, Limits::default())?;
        let disc = opts.discretization(&scn)?;
        match enumerate_priorities_oracle(&scn.robots, &scn.conflicts, disc, opts.model, Limits::default()) {
            Ok(o) => println!(
                "seed {seed}: branch and bound {:?} in {} nodes, enumeration {:.6} over {} of {} assignments",
                bnb.objective(),
                bnb.nodes,
                o.objective,
                o.feasible,
                o.subsolves
            ),
            Err(e) => println!("seed {seed}: branch and bound {:?}, enumeration {e}", bnb.status),
        }
    }
    Ok(())
}
