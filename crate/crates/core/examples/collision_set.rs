//! Samples the collision set of two crossing paths and prints the conflict
//! zones derived from it.

use pathcoord::geometry::{
    bounding_polygon, compute_collision_set, conflicts_between, FollowingDistance, PathGeometry, RobotId, RobotPath,
    RobotSpec, Vec2,
};

fn robot(id: u32, from: (f64, f64), to: (f64, f64)) -> Result<RobotSpec, Box<dyn std::error::Error>> {
    let path = PathGeometry::new(vec![Vec2::new(from.0, from.1), Vec2::new(to.0, to.1)], 5.0, 2.0)?;
    Ok(RobotSpec {
        id: RobotId(id),
        s_out: path.exit_abscissa(),
        path: RobotPath::Geometric(path),
        t_in: 0.0,
        v_in: 10.0,
        v_out: 15.0,
        v_max: 15.0,
        a_min: -3.0,
        a_max: 4.0,
        s_init: None,
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = robot(1, (-15.0, 0.0), (15.0, 0.0))?;
    let b = robot(2, (0.0, -15.0), (0.0, 15.0))?;
    let samples = compute_collision_set(&a, &b, 0.1)?;
    let poly = bounding_polygon(&samples)?;
    let bounds = poly.bounds();
    println!("{} colliding samples", samples.len());
    println!(
        "robot 1 in [{:.2}, {:.2}] m, robot 2 in [{:.2}, {:.2}] m",
        bounds.a_lo, bounds.a_hi, bounds.b_lo, bounds.b_hi
    );
    for c in conflicts_between(&a, &b, 0.1, FollowingDistance::default(), 0)? {
        for z in [&c.forward, &c.backward] {
            println!(
                "conflict {}: {} before {}: perpendicular part {}, parallel part {}",
                c.id,
                z.robot_i,
                z.robot_j,
                z.has_perp(),
                z.has_par()
            );
        }
    }
    Ok(())
}
