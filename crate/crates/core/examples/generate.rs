//! Generates a random intersection scenario and prints it as a scenario file.

use pathcoord::scenario::{gen_scenario, ArrivalModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    let scn = gen_scenario(&ArrivalModel::default(), 20.0, seed)?;
    eprintln!("{} robots, {} conflicts", scn.robots.len(), scn.conflicts.len());
    print!("{}", scn.to_toml());
    Ok(())
}
