//! Solves the bundled three-vehicle intersection, then again with a fixed
//! priority order, and checks both plans for collisions.

use std::path::Path;

use pathcoord::pipeline::{solve_scenario, SolveOptions};
use pathcoord::scenario::Scenario;
use pathcoord::trajectory::{parse_priorities, verify_safety};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scn = Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/three_vehicle.scn"))?;
    let opts = SolveOptions {
        tau: Some(0.25),
        ..SolveOptions::default()
    };
    let mut forced = opts.clone();
    forced.force_priorities = parse_priorities("1>3,3>2,1>2")?;

    for (label, o) in [("optimal", &opts), ("forced 1>3,3>2,1>2", &forced)] {
        let out = solve_scenario(&scn, o)?;
        let Some(m) = &out.metrics else {
            println!("{label}: {:?}", out.status());
            continue;
        };
        let order: Vec<String> = out.graph.relation().iter().map(|(a, b)| format!("{a}>{b}")).collect();
        println!("{label}: mean sojourn {:.3} s, priorities {}", m.mean_sojourn, order.join(","));
        for r in &m.robots {
            println!("  robot {}: in {:.2} s, out {:.2} s", r.robot, r.t_in, r.t_out);
        }
        let safety = verify_safety(&out.trajectories, &scn.robots, &scn.conflicts, 0.25 / 20.0)?;
        println!("  {} samples checked, {} violations", safety.samples, safety.violation_count);
    }
    Ok(())
}
