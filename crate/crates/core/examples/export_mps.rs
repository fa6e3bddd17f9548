//! Builds the model for a generated eight-vehicle instance and writes it as
//! MPS for an external solver.

use pathcoord::milp::{export_model, read_mps, ExportFormat};
use pathcoord::pipeline::{build_for, SolveOptions};
use pathcoord::scenario::{gen_fixed_count, ArrivalModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scn = gen_fixed_count(&ArrivalModel::default(), 8, 1)?;
    let opts = SolveOptions {
        tau: Some(1.0),
        horizon: Some(30.0),
        ..SolveOptions::default()
    };
    let model = build_for(&scn, &opts)?;
    let path = std::env::temp_dir().join("pathcoord_eight.mps");
    export_model(&model, ExportFormat::Mps, std::fs::File::create(&path)?)?;
    let parsed = read_mps(std::io::BufReader::new(std::fs::File::open(&path)?))?;
    println!(
        "{}: {} columns, {} rows, {} binaries",
        path.display(),
        parsed.columns.len(),
        parsed.rows.len(),
        parsed.integer.iter().filter(|&&b| b).count()
    );
    for (family, count) in model.family_counts() {
        println!("  {:<6} {count}", family.label());
    }
    Ok(())
}
