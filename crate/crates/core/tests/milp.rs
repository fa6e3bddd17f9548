use pathcoord::geometry::RobotId;
use pathcoord::milp::{solve_lp, solve_milp, LpStatus, Limits, SolveStatus, FEAS_TOL, INT_TOL};
use pathcoord::model::{Family, MilpModel, Sense, VarIndex};
use pathcoord::pipeline::{build_for, SolveOptions};
use pathcoord::scenario::{gen_abstract, Settings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Y_MAX: f64 = 10.0;

struct Random {
    model: MilpModel,
    binaries: usize,
    /// `(binary coefficients, y coefficient, sense, rhs)`.
    rows: Vec<(Vec<f64>, f64, Sense, f64)>,
    obj: Vec<f64>,
    obj_y: f64,
}

fn random_milp(seed: u64) -> Random {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.random_range(3..=12usize);
    let mut model = MilpModel::empty();
    let cols: Vec<usize> = (0..nb)
        .map(|k| model.add_column(VarIndex::Mu { robot: RobotId(0), k: k as u32 }, 0.0, 1.0))
        .collect();
    let y = model.add_column(VarIndex::S { robot: RobotId(0), k: 0 }, 0.0, Y_MAX);
    let mut rows = Vec::new();
    for _ in 0..rng.random_range(2..=6) {
        let a: Vec<f64> = (0..nb).map(|_| rng.random_range(-5..=5) as f64).collect();
        let c = rng.random_range(-2..=2) as f64;
        let sense = if rng.random_bool(0.7) { Sense::Le } else { Sense::Ge };
        let spread: f64 = a.iter().map(|v| v.abs()).sum::<f64>() + c.abs() * Y_MAX;
        let rhs = (rng.random_range(-0.3..0.5) * spread).round();
        let mut coeffs: Vec<(usize, f64)> = cols.iter().zip(&a).filter(|(_, v)| **v != 0.0).map(|(&c, &v)| (c, v)).collect();
        if c != 0.0 {
            coeffs.push((y, c));
        }
        model.add_row(Family::Cut, coeffs, sense, rhs);
        rows.push((a, c, sense, rhs));
    }
    let obj: Vec<f64> = (0..nb).map(|_| rng.random_range(-5..=5) as f64).collect();
    let obj_y = rng.random_range(-2..=2) as f64 * 0.5;
    model.objective = cols.iter().zip(&obj).map(|(&c, &v)| (c, v)).collect();
    model.objective.push((y, obj_y));
    Random {
        model,
        binaries: nb,
        rows,
        obj,
        obj_y,
    }
}

/// Enumerates every binary assignment; the single continuous column is
/// then confined to an interval and placed at its best end.
fn brute_force(p: &Random) -> Option<f64> {
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << p.binaries) {
        let x: Vec<f64> = (0..p.binaries).map(|i| ((mask >> i) & 1) as f64).collect();
        let (mut lo, mut hi) = (0.0, Y_MAX);
        let mut ok = true;
        for (a, c, sense, rhs) in &p.rows {
            let rest = rhs - a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>();
            // c * y (sense) rest
            let le = *sense == Sense::Le;
            if *c == 0.0 {
                ok &= if le { 0.0 <= rest } else { 0.0 >= rest };
            } else if (*c > 0.0) == le {
                hi = f64::min(hi, rest / c);
            } else {
                lo = f64::max(lo, rest / c);
            }
        }
        if !ok || lo > hi + 1e-9 {
            continue;
        }
        let y = if p.obj_y >= 0.0 { hi } else { lo };
        let value = p.obj.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() + p.obj_y * y;
        best = Some(best.map_or(value, |b: f64| b.max(value)));
    }
    best
}

#[test]
fn branch_and_bound_matches_enumeration() {
    let (mut feasible, mut infeasible) = (0, 0);
    for seed in 0..150 {
        let p = random_milp(seed);
        let report = solve_milp(&p.model, Limits::default()).unwrap();
        match brute_force(&p) {
            Some(best) => {
                assert_eq!(report.status, SolveStatus::Optimal, "seed {seed}");
                let got = report.objective().unwrap();
                assert!((got - best).abs() < 1e-6, "seed {seed}: {got} vs {best}");
                let x = report.values().unwrap();
                assert!(p.model.max_violation(x) <= FEAS_TOL);
                assert!(p.model.max_integrality_violation(x) <= INT_TOL);
                feasible += 1;
            }
            None => {
                assert_eq!(report.status, SolveStatus::Infeasible, "seed {seed}");
                infeasible += 1;
            }
        }
    }
    assert!(feasible > 50 && infeasible > 0, "{feasible} feasible, {infeasible} infeasible");
}

fn scenarios() -> impl Iterator<Item = pathcoord::scenario::Scenario> {
    (0..8u64).map(|seed| {
        gen_abstract(
            3,
            3,
            seed,
            Settings {
                tau: Some(0.5),
                horizon: Some(10.0),
                ..Settings::default()
            },
        )
        .unwrap()
    })
}

#[test]
fn incumbents_are_feasible_and_integral() {
    let mut solved = 0;
    for scn in scenarios() {
        let m = build_for(&scn, &SolveOptions::default()).unwrap();
        let r = solve_milp(&m, Limits::default()).unwrap();
        if let Some(x) = r.values() {
            assert!(m.max_violation(x) <= FEAS_TOL, "violation {}", m.max_violation(x));
            assert!(m.max_integrality_violation(x) <= INT_TOL);
            assert!((m.objective_value(x) - r.objective().unwrap()).abs() < 1e-6);
            assert!(r.bound >= r.objective().unwrap() - 1e-6);
            solved += 1;
        }
    }
    assert!(solved >= 5);
}

// The optimality conditions of the relaxation, recomputed from the raw
// primal and dual vectors: reduced costs equal c - A^T y, every nonzero
// dual sits on an active bound, and duals carry the sign a maximization
// requires.
#[test]
fn relaxation_satisfies_optimality_conditions() {
    for scn in scenarios() {
        let m = build_for(&scn, &SolveOptions::default()).unwrap();
        let sol = solve_lp(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let x = &sol.values;
        assert!(m.max_violation(x) <= FEAS_TOL);
        assert_eq!(sol.row_duals.len(), m.rows.len());

        let mut c = vec![0.0; m.columns.len()];
        for &(j, a) in &m.objective {
            c[j] += a;
        }
        let mut aty = vec![0.0; m.columns.len()];
        for (r, row) in m.rows.iter().enumerate() {
            let act = row.activity(x);
            assert!((act - sol.row_activities[r]).abs() < 1e-6);
            let y = sol.row_duals[r];
            for &(j, a) in &row.coeffs {
                aty[j] += a * y;
            }
            let (lo_gap, hi_gap) = match row.sense {
                Sense::Le => (f64::INFINITY, row.rhs - act),
                Sense::Ge => (act - row.rhs, f64::INFINITY),
                Sense::Eq => (0.0, 0.0),
            };
            // a positive dual prices the upper side, a negative one the lower
            if y > 1e-7 {
                assert!(hi_gap.abs() < 1e-6, "row {r} dual {y} but slack {hi_gap}");
            }
            if y < -1e-7 {
                assert!(lo_gap.abs() < 1e-6, "row {r} dual {y} but slack {lo_gap}");
            }
        }
        for (j, col) in m.columns.iter().enumerate() {
            let d = sol.reduced_costs[j];
            assert!((d - (c[j] - aty[j])).abs() < 1e-6, "column {j}: {d} vs {}", c[j] - aty[j]);
            if d > 1e-7 {
                assert!((x[j] - col.upper).abs() < 1e-6, "column {j} below upper with d = {d}");
            }
            if d < -1e-7 {
                assert!((x[j] - col.lower).abs() < 1e-6, "column {j} above lower with d = {d}");
            }
        }
    }
}

#[test]
fn solves_are_deterministic() {
    for scn in scenarios().take(4) {
        let m = build_for(&scn, &SolveOptions::default()).unwrap();
        let a = solve_milp(&m, Limits::default()).unwrap();
        let b = solve_milp(&m, Limits::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.lp_solves, b.lp_solves);
        assert_eq!(a.values(), b.values());
    }
}

#[test]
fn node_limit_reports_timeout() {
    let scn = pathcoord::scenario::Scenario::load(std::path::Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/three_vehicle.scn"
    )))
    .unwrap();
    let mut opts = SolveOptions::default();
    opts.force_priorities = pathcoord::trajectory::parse_priorities("1>3,3>2,1>2").unwrap();
    let m = build_for(&scn, &opts).unwrap();
    let r = solve_milp(
        &m,
        Limits {
            node_limit: Some(1),
            ..Limits::default()
        },
    )
    .unwrap();
    assert!(
        matches!(r.status, SolveStatus::TimeoutWithIncumbent | SolveStatus::TimeoutNoIncumbent),
        "{:?}",
        r.status
    );
    assert_eq!(r.incumbent.is_some(), r.status == SolveStatus::TimeoutWithIncumbent);
}
