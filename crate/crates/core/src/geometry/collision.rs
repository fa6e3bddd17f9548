use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{arc_pose, GeometryError, OrientedRect, PathGeometry, RobotSpec};

/// Colliding configurations `(s_i, s_j)` found on a regular grid of spacing
/// `resolution` over `[0, s_i^out] x [0, s_j^out]`.
///
/// Cells are stored as grid indices, sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionSamples {
    pub resolution: f64,
    /// `(s_i^out, s_j^out)`.
    pub extent: (f64, f64),
    pub cells: Vec<(u32, u32)>,
}

impl CollisionSamples {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let r = self.resolution;
        self.cells
            .iter()
            .map(move |&(a, b)| (a as f64 * r, b as f64 * r))
    }

    /// Same set seen from the other robot, i.e. with coordinates swapped.
    pub fn transpose(&self) -> CollisionSamples {
        let mut cells: Vec<_> = self.cells.iter().map(|&(a, b)| (b, a)).collect();
        cells.sort_unstable();
        CollisionSamples {
            resolution: self.resolution,
            extent: (self.extent.1, self.extent.0),
            cells,
        }
    }

    /// `s_i,s_j` rows with a header, for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s_i,s_j\n");
        for (a, b) in self.points() {
            let _ = writeln!(out, "{a},{b}");
        }
        out
    }
}

/// Footprints along a path at every grid abscissa. Positions where the body
/// spans a bend also carry the footprints half a step before and after, so
/// the rotation between samples is covered.
fn footprints(path: &PathGeometry, s_out: f64, resolution: f64) -> Vec<Vec<OrientedRect>> {
    let hi = path.exit_abscissa();
    let n = grid_len(s_out, resolution);
    (0..n)
        .map(|k| {
            let s = (k as f64 * resolution).min(hi);
            let mut rects = vec![arc_pose(path, s).expect("grid inside path range")];
            if path.bends_within(s - path.robot_length(), s) {
                for ds in [-0.5 * resolution, 0.5 * resolution] {
                    let t = (s + ds).clamp(0.0, hi);
                    rects.push(arc_pose(path, t).expect("clamped"));
                }
            }
            rects
        })
        .collect()
}

fn grid_len(s_out: f64, resolution: f64) -> usize {
    (s_out / resolution + 1e-9).floor() as usize + 1
}

/// Samples the collision set between two robots with geometric paths.
pub fn compute_collision_set(
    spec_i: &RobotSpec,
    spec_j: &RobotSpec,
    resolution: f64,
) -> Result<CollisionSamples, GeometryError> {
    if !(resolution > 0.0) {
        return Err(GeometryError::InvalidResolution(resolution));
    }
    let path_i = spec_i
        .geometry()
        .ok_or(GeometryError::AbstractPath(spec_i.id))?;
    let path_j = spec_j
        .geometry()
        .ok_or(GeometryError::AbstractPath(spec_j.id))?;
    let fp_i = footprints(path_i, spec_i.s_out, resolution);
    let fp_j = footprints(path_j, spec_j.s_out, resolution);

    let cells: Vec<(u32, u32)> = fp_i
        .par_iter()
        .enumerate()
        .flat_map_iter(|(a, rects_a)| {
            fp_j.iter()
                .enumerate()
                .filter(move |(_, rects_b)| {
                    rects_a
                        .iter()
                        .any(|ra| rects_b.iter().any(|rb| ra.intersects(rb)))
                })
                .map(move |(b, _)| (a as u32, b as u32))
                .collect::<Vec<_>>()
        })
        .collect();

    Ok(CollisionSamples {
        resolution,
        extent: (spec_i.s_out, spec_j.s_out),
        cells,
    })
}

/// Splits a sample set into its 8-connected components on the grid.
///
/// Components are returned in the order of their smallest cell.
pub fn split_components(samples: &CollisionSamples) -> Vec<CollisionSamples> {
    let all: HashSet<(u32, u32)> = samples.cells.iter().copied().collect();
    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(all.len());
    let mut components = Vec::new();
    let mut sorted = samples.cells.clone();
    sorted.sort_unstable();
    for &start in &sorted {
        if seen.contains(&start) {
            continue;
        }
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some((a, b)) = queue.pop_front() {
            cells.push((a, b));
            for da in -1i64..=1 {
                for db in -1i64..=1 {
                    let na = a as i64 + da;
                    let nb = b as i64 + db;
                    if na < 0 || nb < 0 {
                        continue;
                    }
                    let n = (na as u32, nb as u32);
                    if all.contains(&n) && seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
        }
        cells.sort_unstable();
        components.push(CollisionSamples {
            resolution: samples.resolution,
            extent: samples.extent,
            cells,
        });
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RobotId, RobotPath, Vec2};

    fn robot(id: u32, start: Vec2, end: Vec2) -> RobotSpec {
        let path = PathGeometry::straight(start, end, 5.0, 2.0).unwrap();
        RobotSpec {
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
        }
    }

    #[test]
    fn parallel_corridors_do_not_collide() {
        let a = robot(1, Vec2::new(0.0, 0.0), Vec2::new(30.0, 0.0));
        let b = robot(2, Vec2::new(0.0, 10.0), Vec2::new(30.0, 10.0));
        let set = compute_collision_set(&a, &b, 0.1).unwrap();
        assert!(set.is_empty());
        assert!(split_components(&set).is_empty());
    }

    #[test]
    fn abstract_paths_are_rejected() {
        let mut a = robot(1, Vec2::new(0.0, 0.0), Vec2::new(30.0, 0.0));
        let b = robot(2, Vec2::new(0.0, 10.0), Vec2::new(30.0, 10.0));
        a.path = RobotPath::Abstract(crate::geometry::AbstractPath { s_out: 35.0 });
        assert!(matches!(
            compute_collision_set(&a, &b, 0.1),
            Err(GeometryError::AbstractPath(RobotId(1)))
        ));
        assert!(compute_collision_set(&b, &b, 0.0).is_err());
    }

    #[test]
    fn coincident_paths_give_the_following_band() {
        let a = robot(1, Vec2::new(0.0, 0.0), Vec2::new(30.0, 0.0));
        let b = robot(2, Vec2::new(0.0, 0.0), Vec2::new(30.0, 0.0));
        let set = compute_collision_set(&a, &b, 0.5).unwrap();
        let members: HashSet<_> = set.cells.iter().copied().collect();
        let n = grid_len(35.0, 0.5) as u32;
        for ia in 0..n {
            for ib in 0..n {
                let d = (ia as f64 - ib as f64).abs() * 0.5;
                assert_eq!(members.contains(&(ia, ib)), d < 5.0, "({ia},{ib})");
            }
        }
        assert_eq!(split_components(&set).len(), 1);
    }

    #[test]
    fn transpose_matches_swapped_call() {
        let a = robot(1, Vec2::new(-15.0, 0.0), Vec2::new(15.0, 0.0));
        let b = robot(2, Vec2::new(0.0, -12.0), Vec2::new(0.0, 18.0));
        let ab = compute_collision_set(&a, &b, 0.25).unwrap();
        let ba = compute_collision_set(&b, &a, 0.25).unwrap();
        assert_eq!(ab.transpose(), ba);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = CollisionSamples {
            resolution: 0.5,
            extent: (10.0, 10.0),
            cells: vec![(1, 2), (2, 2)],
        };
        assert_eq!(s.to_csv(), "s_i,s_j\n0.5,1\n1,1\n");
    }
}
