use pathcoord::geometry::{
    bounding_polygon, compute_collision_set, conflicts_between, decompose, split_components, AbstractPath,
    CollisionPolygon, DirectionalBounds, Direction, FollowingDistance, PathGeometry, RobotId, RobotPath, RobotSpec,
    Vec2,
};
use proptest::prelude::*;

fn geo(id: u32, pts: Vec<Vec2>) -> RobotSpec {
    let path = PathGeometry::new(pts, 5.0, 2.0).unwrap();
    let s_out = path.exit_abscissa();
    RobotSpec {
        id: RobotId(id),
        path: RobotPath::Geometric(path),
        s_out,
        t_in: 0.0,
        v_in: 10.0,
        v_out: 15.0,
        v_max: 15.0,
        a_min: -3.0,
        a_max: 4.0,
        s_init: None,
    }
}

fn straight(id: u32, from: (f64, f64), to: (f64, f64)) -> RobotSpec {
    geo(id, vec![Vec2::new(from.0, from.1), Vec2::new(to.0, to.1)])
}

fn ids() -> (RobotId, RobotId) {
    (RobotId(1), RobotId(2))
}

// Orthogonal crossing at s = 15 on both paths: the front reaches the other
// robot's 2 m strip at s = 14 and the rear clears it at s = 21.
#[test]
fn orthogonal_crossing_matches_closed_form() {
    let a = straight(1, (-15.0, 0.0), (15.0, 0.0));
    let b = straight(2, (0.0, -15.0), (0.0, 15.0));
    let res = 0.05;
    let samples = compute_collision_set(&a, &b, res).unwrap();
    let bounds = DirectionalBounds::of_points(samples.points()).unwrap();
    for (lo, hi) in [(bounds.a_lo, bounds.a_hi), (bounds.b_lo, bounds.b_hi)] {
        assert!((lo - 14.0).abs() <= res + 1e-9, "lower {lo}");
        assert!((hi - 21.0).abs() <= res + 1e-9, "upper {hi}");
    }
    // the set is the full square, not just its bounding box
    let side = ((21.0 - 14.0) / res) as usize - 1;
    assert!(samples.len() >= side * side);
    let poly = bounding_polygon(&samples).unwrap();
    assert!(poly.contains(14.0, 14.0) && poly.contains(20.99, 20.99));
    assert!(!poly.contains(13.8, 17.0));
}

#[test]
fn coincident_paths_give_the_length_band() {
    let a = straight(1, (0.0, 0.0), (40.0, 0.0));
    let b = straight(2, (0.0, 0.0), (40.0, 0.0));
    let res = 0.25;
    let samples = compute_collision_set(&a, &b, res).unwrap();
    let cells: std::collections::HashSet<(u32, u32)> = samples.cells.iter().copied().collect();
    let n = (45.0 / res) as u32;
    for i in 0..=n {
        for j in 0..=n {
            let d = (i as f64 - j as f64).abs() * res;
            if (d - 5.0).abs() < 1e-9 {
                continue;
            }
            if d < 5.0 {
                assert!(cells.contains(&(i, j)), "({i}, {j}) should collide");
            } else {
                assert!(!cells.contains(&(i, j)), "({i}, {j}) should be free");
            }
        }
    }
}

#[test]
fn parallel_lanes_never_collide() {
    let a = straight(1, (0.0, 0.0), (40.0, 0.0));
    let b = straight(2, (0.0, 10.0), (40.0, 10.0));
    assert!(compute_collision_set(&a, &b, 0.2).unwrap().is_empty());
    assert!(conflicts_between(&a, &b, 0.2, FollowingDistance::default(), 0).unwrap().is_empty());
}

#[test]
fn curve_crossing_a_road_twice_has_two_components() {
    let road = straight(1, (-30.0, 0.0), (30.0, 0.0));
    let arch = geo(
        2,
        vec![
            Vec2::new(-20.0, -15.0),
            Vec2::new(-10.0, 15.0),
            Vec2::new(10.0, 15.0),
            Vec2::new(20.0, -15.0),
        ],
    );
    let samples = compute_collision_set(&road, &arch, 0.25).unwrap();
    let comps = split_components(&samples);
    assert_eq!(comps.len(), 2);
    // components are disjoint and cover the set
    let total: usize = comps.iter().map(|c| c.len()).sum();
    assert_eq!(total, samples.len());
    // the road robot meets the arch near x = -15 first, then near x = +15
    let centre = |c: &pathcoord::geometry::CollisionSamples| {
        c.points().map(|p| p.0).sum::<f64>() / c.len() as f64
    };
    assert!(centre(&comps[0]) < centre(&comps[1]));
    let conflicts = conflicts_between(&road, &arch, 0.25, FollowingDistance::default(), 7).unwrap();
    assert_eq!(conflicts.iter().map(|c| c.id).collect::<Vec<_>>(), vec![7, 8]);
}

fn segment() -> impl Strategy<Value = ((f64, f64), (f64, f64))> {
    let coord = -20.0..20.0f64;
    (coord.clone(), coord.clone(), coord.clone(), coord)
        .prop_filter("long enough", |(a, b, c, d)| ((a - c).powi(2) + (b - d).powi(2)).sqrt() > 8.0)
        .prop_map(|(a, b, c, d)| ((a, b), (c, d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn collision_set_is_symmetric(p in segment(), q in segment()) {
        let a = straight(1, p.0, p.1);
        let b = straight(2, q.0, q.1);
        let ab = compute_collision_set(&a, &b, 0.5).unwrap();
        let ba = compute_collision_set(&b, &a, 0.5).unwrap();
        prop_assert_eq!(ab.transpose(), ba);
    }

    #[test]
    fn bounding_polygon_contains_every_sample(p in segment(), q in segment()) {
        let a = straight(1, p.0, p.1);
        let b = straight(2, q.0, q.1);
        let samples = compute_collision_set(&a, &b, 0.5).unwrap();
        for comp in split_components(&samples) {
            let poly = bounding_polygon(&comp).unwrap();
            for (x, y) in comp.points() {
                prop_assert!(poly.contains(x, y), "({}, {}) outside", x, y);
            }
        }
    }

    // Every point of the region breaks the exclusion conditions of the
    // leader's zone; every point where the leader is past the region or
    // the follower has not reached it satisfies them.
    #[test]
    fn zone_conditions_cover_the_region(
        a_lo in 0.0..20.0f64, wa in 3.0..15.0f64,
        b_lo in 0.0..20.0f64, wb in 3.0..15.0f64,
        band in prop::option::of(2.0..8.0f64),
        d_par in 0.0..3.0f64,
    ) {
        let (d_lo, d_hi) = match band {
            Some(w) => (b_lo - a_lo - w, b_lo - a_lo + w),
            None => (-1e3, 1e3),
        };
        let bounds = DirectionalBounds { a_lo, a_hi: a_lo + wa, b_lo, b_hi: b_lo + wb, d_lo, d_hi };
        let Ok(poly) = CollisionPolygon::from_bounds(bounds, Some((40.0, 40.0))) else { return Ok(()); };
        let zone = decompose(&poly, FollowingDistance::new(d_par).unwrap(), Direction::IOverJ, ids()).unwrap();
        let b = poly.bounds();
        let step = 0.25;
        for i in 0..=160 {
            for j in 0..=160 {
                let (x, y) = (i as f64 * step, j as f64 * step);
                if poly.signed_distance(x, y) < -1e-6 {
                    prop_assert!(zone.violates(x, y, 0.0), "({}, {}) inside but allowed", x, y);
                }
                if x >= b.a_hi || y <= b.b_lo {
                    prop_assert!(!zone.violates(x, y, 1e-9), "({}, {}) clear but excluded", x, y);
                }
            }
        }
    }

    #[test]
    fn diagonal_shift_shifts_bounds(
        a_lo in 5.0..20.0f64, wa in 3.0..10.0f64,
        b_lo in 5.0..20.0f64, wb in 3.0..10.0f64,
        band in prop::option::of(2.0..6.0f64),
        c in 0.5..10.0f64,
    ) {
        let (d_lo, d_hi) = match band {
            Some(w) => (b_lo - a_lo - w, b_lo - a_lo + w),
            None => (-1e3, 1e3),
        };
        let bounds = DirectionalBounds { a_lo, a_hi: a_lo + wa, b_lo, b_hi: b_lo + wb, d_lo, d_hi };
        let Ok(poly) = CollisionPolygon::from_bounds(bounds, None) else { return Ok(()); };
        let d = FollowingDistance::default();
        let z0 = decompose(&poly, d, Direction::IOverJ, ids()).unwrap();
        let z1 = decompose(&poly.translated(c, c), d, Direction::IOverJ, ids()).unwrap();
        let pairs = [
            (z0.s_par_lo_i, z1.s_par_lo_i, z0.has_par()),
            (z0.s_par_hi_i, z1.s_par_hi_i, z0.has_par()),
            (z0.s_par_lo_j, z1.s_par_lo_j, z0.has_par()),
            (z0.s_par_hi_j, z1.s_par_hi_j, z0.has_par()),
            (z0.s_perp_lo_i, z1.s_perp_lo_i, z0.has_perp()),
            (z0.s_perp_hi_i, z1.s_perp_hi_i, z0.has_perp()),
            (z0.s_perp_lo_j, z1.s_perp_lo_j, z0.has_perp()),
            (z0.s_perp_hi_j, z1.s_perp_hi_j, z0.has_perp()),
        ];
        prop_assert_eq!(z0.has_par(), z1.has_par());
        prop_assert_eq!(z0.has_perp(), z1.has_perp());
        for (before, after, used) in pairs {
            if used {
                prop_assert!((after - before - c).abs() < 1e-9, "{} -> {}", before, after);
            } else {
                prop_assert_eq!((before, after), (0.0, 0.0));
            }
        }
        prop_assert!((z0.offset_aij - z1.offset_aij).abs() < 1e-9);
    }

    #[test]
    fn rectangles_have_no_parallel_part(
        a_lo in 1.0..20.0f64, wa in 3.0..10.0f64, b_lo in 1.0..20.0f64, wb in 3.0..10.0f64,
    ) {
        let poly = CollisionPolygon::new(
            vec![(a_lo, b_lo), (a_lo + wa, b_lo), (a_lo + wa, b_lo + wb), (a_lo, b_lo + wb)],
            Some((40.0, 40.0)),
        ).unwrap();
        for dir in [Direction::IOverJ, Direction::JOverI] {
            let z = decompose(&poly, FollowingDistance::default(), dir, ids()).unwrap();
            prop_assert!(z.has_perp() && !z.has_par());
        }
    }

    #[test]
    fn full_bands_have_no_perpendicular_part(w in 2.0..8.0f64, len in 20.0..50.0f64) {
        let poly = CollisionPolygon::from_bounds(
            DirectionalBounds { a_lo: 0.0, a_hi: len, b_lo: 0.0, b_hi: len, d_lo: -w, d_hi: w },
            Some((len, len)),
        ).unwrap();
        let z = decompose(&poly, FollowingDistance::default(), Direction::IOverJ, ids()).unwrap();
        prop_assert!(z.has_par() && !z.has_perp());
        // the lower diagonal leaves the bottom edge at s_i = w
        prop_assert!((z.s_par_lo_i - w).abs() < 1e-9);
        prop_assert_eq!(z.s_par_hi_i, len);
    }
}

#[test]
fn abstract_robots_have_no_geometry() {
    let r = RobotSpec {
        path: RobotPath::Abstract(AbstractPath { s_out: 30.0 }),
        s_out: 30.0,
        ..straight(1, (0.0, 0.0), (30.0, 0.0))
    };
    let other = straight(2, (0.0, -10.0), (0.0, 10.0));
    assert!(compute_collision_set(&r, &other, 0.5).is_err());
}
