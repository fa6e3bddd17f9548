use super::{Bound, Family, Literal, MilpModel, Part, Sense, Side, VarIndex, EPS_ROLES};
use crate::geometry::{ConflictZone, RobotId};

fn lit(col: usize, active: bool) -> Literal {
    Literal { col, active }
}

fn eps(conflict: usize, leader: RobotId, part: Part, bound: Bound, side: Side, k: u32) -> VarIndex {
    VarIndex::Eps {
        conflict,
        leader,
        part,
        bound,
        side,
        k,
    }
}

/// Robot watched by an indicator and the threshold it compares against.
fn eps_target(zone: &ConflictZone, part: Part, bound: Bound, side: Side) -> Option<(RobotId, f64)> {
    let used = match part {
        Part::Par => zone.has_par(),
        Part::Perp => zone.has_perp(),
    };
    if !used {
        return None;
    }
    let thr = match (part, bound, side) {
        (Part::Perp, Bound::Out, Side::I) => zone.s_perp_hi_i,
        (Part::Perp, Bound::In, Side::I) => zone.s_perp_lo_i,
        (Part::Perp, Bound::Out, Side::J) => zone.s_perp_hi_j,
        (Part::Perp, Bound::In, Side::J) => zone.s_perp_lo_j,
        (Part::Par, Bound::Out, Side::I) => zone.s_par_hi_i,
        (Part::Par, Bound::In, Side::I) => zone.s_par_lo_i,
        (Part::Par, Bound::Out, Side::J) => zone.s_par_hi_j,
        (Part::Par, Bound::In, Side::J) => zone.s_par_lo_j,
    };
    let robot = match side {
        Side::I => zone.robot_i,
        Side::J => zone.robot_j,
    };
    Some((robot, thr))
}

/// Family (h): entry/exit indicators, zone indicators and the priority
/// exclusivity rows.
pub fn generate_indicator_constraints(model: &mut MilpModel) {
    let big_k = model.meta.k;
    let robots: Vec<_> = model.robots.iter().map(|r| (r.id, r.s_out)).collect();
    for &(robot, s_out) in &robots {
        for k in 0..=big_k {
            let s = model.id(VarIndex::S { robot, k });
            let mu = model.id(VarIndex::Mu { robot, k });
            let sigma = model.id(VarIndex::Sigma { robot, k });
            model.add_implication(Family::H1, &[lit(mu, false)], &[(s, 1.0)], Sense::Le, 0.0);
            model.add_implication(Family::H2, &[lit(mu, true)], &[(s, 1.0)], Sense::Ge, 0.0);
            model.add_implication(Family::H3, &[lit(sigma, false)], &[(s, 1.0)], Sense::Le, s_out);
            model.add_implication(Family::H4, &[lit(sigma, true)], &[(s, 1.0)], Sense::Ge, s_out);
        }
    }
    let conflicts = model.conflicts.clone();
    for c in &conflicts {
        for k in 0..=big_k {
            for zone in [&c.forward, &c.backward] {
                for (part, bound, side) in EPS_ROLES {
                    let Some((robot, thr)) = eps_target(zone, part, bound, side) else {
                        continue;
                    };
                    let e = model.id(eps(c.id, zone.robot_i, part, bound, side, k));
                    let s = model.id(VarIndex::S { robot, k });
                    model.add_implication(Family::HEps, &[lit(e, false)], &[(s, 1.0)], Sense::Le, thr);
                    model.add_implication(Family::HEps, &[lit(e, true)], &[(s, 1.0)], Sense::Ge, thr);
                }
            }
        }
    }
    for c in &conflicts {
        let (a, b) = (c.first(), c.second());
        let ab = model.id(VarIndex::Pi {
            conflict: c.id,
            leader: a,
            follower: b,
        });
        let ba = model.id(VarIndex::Pi {
            conflict: c.id,
            leader: b,
            follower: a,
        });
        model.add_row(Family::H5, vec![(ab, 1.0), (ba, 1.0)], Sense::Eq, 1.0);
    }
}

/// Family (b): entry speed before entry, exit speed, initial state and
/// liveness.
pub fn generate_boundary_constraints(model: &mut MilpModel) {
    let big_k = model.meta.k;
    let robots = model.robots.clone();
    for r in &robots {
        let robot = r.id;
        for k in 0..big_k {
            let mu = model.id(VarIndex::Mu { robot, k });
            let v_next = model.id(VarIndex::V { robot, k: k + 1 });
            model.add_implication(Family::B1, &[lit(mu, false)], &[(v_next, 1.0)], Sense::Eq, r.v_in);
        }
        for k in 0..big_k {
            let sigma_next = model.id(VarIndex::Sigma { robot, k: k + 1 });
            let v = model.id(VarIndex::V { robot, k });
            model.add_implication(Family::B2, &[lit(sigma_next, true)], &[(v, 1.0)], Sense::Eq, r.v_out);
        }
        let s0 = model.id(VarIndex::S { robot, k: 0 });
        model.add_row(Family::B3, vec![(s0, 1.0)], Sense::Eq, super::initial_abscissa(r));
        let sk = model.id(VarIndex::S { robot, k: big_k });
        model.add_row(Family::B4, vec![(sk, 1.0)], Sense::Ge, r.s_out);
        let v0 = model.id(VarIndex::V { robot, k: 0 });
        model.add_row(Family::B5, vec![(v0, 1.0)], Sense::Eq, r.v_in);
    }
}

/// Family (k): trapezoidal kinematics and acceleration bounds while inside.
pub fn generate_kinodynamic_constraints(model: &mut MilpModel) {
    let big_k = model.meta.k;
    let tau = model.meta.tau;
    let robots = model.robots.clone();
    for r in &robots {
        let robot = r.id;
        for k in 0..big_k {
            let sigma = model.id(VarIndex::Sigma { robot, k });
            let s0 = model.id(VarIndex::S { robot, k });
            let s1 = model.id(VarIndex::S { robot, k: k + 1 });
            let v0 = model.id(VarIndex::V { robot, k });
            let v1 = model.id(VarIndex::V { robot, k: k + 1 });
            let off = [lit(sigma, false)];
            model.add_implication(
                Family::K1,
                &off,
                &[(s1, 1.0), (s0, -1.0), (v1, -0.5 * tau), (v0, -0.5 * tau)],
                Sense::Eq,
                0.0,
            );
            let dv = [(v1, 1.0), (v0, -1.0)];
            model.add_implication(Family::K2, &off, &dv, Sense::Le, r.a_max * tau);
            model.add_implication(Family::K3, &off, &dv, Sense::Ge, r.a_min * tau);
        }
    }
}

/// Family (s): the priority holder clears the perpendicular part before the
/// other robot enters it, and keeps the offset along the parallel part.
pub fn generate_safety_constraints(model: &mut MilpModel) {
    let big_k = model.meta.k;
    let tau = model.meta.tau;
    let conflicts = model.conflicts.clone();
    for c in &conflicts {
        for zone in [&c.forward, &c.backward] {
            let (li, fj) = (zone.robot_i, zone.robot_j);
            let pi = model.id(VarIndex::Pi {
                conflict: c.id,
                leader: li,
                follower: fj,
            });
            for k in 0..big_k {
                if zone.has_perp() {
                    let out_i = model.id(eps(c.id, li, Part::Perp, Bound::Out, Side::I, k));
                    let in_j = model.id(eps(c.id, li, Part::Perp, Bound::In, Side::J, k + 1));
                    model.add_implication(
                        Family::S1,
                        &[lit(pi, true), lit(out_i, false)],
                        &[(in_j, 1.0)],
                        Sense::Le,
                        0.0,
                    );
                }
                if zone.has_par() {
                    let in_j = model.id(eps(c.id, li, Part::Par, Bound::In, Side::J, k));
                    let out_i = model.id(eps(c.id, li, Part::Par, Bound::Out, Side::I, k));
                    let lits = [lit(pi, true), lit(in_j, true), lit(out_i, false)];
                    let si = model.id(VarIndex::S { robot: li, k: k + 1 });
                    let sj = model.id(VarIndex::S { robot: fj, k: k + 1 });
                    let vi = model.id(VarIndex::V { robot: li, k: k + 1 });
                    let vj = model.id(VarIndex::V { robot: fj, k: k + 1 });
                    let a = zone.offset_aij;
                    model.add_implication(Family::S2, &lits, &[(si, 1.0), (sj, -1.0)], Sense::Ge, a);
                    model.add_implication(
                        Family::S3,
                        &lits,
                        &[(si, 1.0), (sj, -1.0), (vi, 0.5 * tau), (vj, -0.5 * tau)],
                        Sense::Ge,
                        a,
                    );
                }
            }
        }
    }
}

/// Maximize the average number of steps spent after exit, optionally plus
/// the averaged normalized speed.
pub fn set_objective(model: &mut MilpModel, tie_break: bool) {
    let n = model.robots.len() as f64;
    let big_k = model.meta.k;
    let mut objective = Vec::new();
    let robots: Vec<_> = model.robots.iter().map(|r| (r.id, r.v_max)).collect();
    for &(robot, v_max) in &robots {
        for k in 0..=big_k {
            objective.push((model.id(VarIndex::Sigma { robot, k }), 1.0 / n));
            if tie_break {
                let w = 1.0 / (n * big_k as f64 * v_max);
                objective.push((model.id(VarIndex::V { robot, k }), w));
            }
        }
    }
    objective.sort_by_key(|&(c, _)| c);
    model.objective = objective;
    model.meta.options.tie_break = tie_break;
}

/// Indicators never switch back to zero: `x^k <= x^(k+1)` for every entry,
/// exit and zone indicator that appears in a constraint.
pub fn add_monotonicity_cuts(model: &mut MilpModel) {
    let big_k = model.meta.k;
    let robots: Vec<_> = model.robots.iter().map(|r| r.id).collect();
    for &robot in &robots {
        for k in 0..big_k {
            for mk in [
                |robot, k| VarIndex::Mu { robot, k },
                |robot, k| VarIndex::Sigma { robot, k },
            ] {
                let a = model.id(mk(robot, k));
                let b = model.id(mk(robot, k + 1));
                model.add_row(Family::Cut, vec![(a, 1.0), (b, -1.0)], Sense::Le, 0.0);
            }
        }
    }
    let conflicts = model.conflicts.clone();
    for c in &conflicts {
        for zone in [&c.forward, &c.backward] {
            for (part, bound, side) in EPS_ROLES {
                if eps_target(zone, part, bound, side).is_none() {
                    continue;
                }
                for k in 0..big_k {
                    let a = model.id(eps(c.id, zone.robot_i, part, bound, side, k));
                    let b = model.id(eps(c.id, zone.robot_i, part, bound, side, k + 1));
                    model.add_row(Family::Cut, vec![(a, 1.0), (b, -1.0)], Sense::Le, 0.0);
                }
            }
        }
    }
    model.meta.options.cuts = true;
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::geometry::{
        AbstractPath, CollisionPolygon, Conflict, FollowingDistance, RobotPath, RobotSpec,
    };

    pub(crate) fn robot(id: u32, s_out: f64, t_in: f64) -> RobotSpec {
        RobotSpec {
            id: RobotId(id),
            path: RobotPath::Abstract(AbstractPath { s_out }),
            s_out,
            t_in,
            v_in: 10.0,
            v_out: 15.0,
            v_max: 15.0,
            a_min: -3.0,
            a_max: 4.0,
            s_init: None,
        }
    }

    fn crossing() -> Conflict {
        let poly = CollisionPolygon::new(
            vec![(10.0, 12.0), (17.0, 12.0), (17.0, 19.0), (10.0, 19.0)],
            Some((30.0, 30.0)),
        )
        .unwrap();
        Conflict::from_polygon(0, (RobotId(1), RobotId(2)), &poly, FollowingDistance::default())
            .unwrap()
    }

    #[test]
    fn column_counts_for_two_robots_one_zone() {
        let robots = [robot(1, 30.0, 0.0), robot(2, 30.0, 0.0)];
        let m = build_model(&robots, &[crossing()], Discretization::new(1.0, 10).unwrap(), ModelOptions::default())
            .unwrap();
        let count = |f: fn(&VarIndex) -> bool| m.columns.iter().filter(|c| f(&c.index)).count();
        assert_eq!(count(|v| matches!(v, VarIndex::S { .. } | VarIndex::V { .. })), 44);
        assert_eq!(count(|v| matches!(v, VarIndex::Mu { .. } | VarIndex::Sigma { .. })), 44);
        assert_eq!(count(|v| matches!(v, VarIndex::Eps { .. })), 88);
        assert_eq!(count(|v| matches!(v, VarIndex::Pi { .. })), 2);
        assert!(m.columns.iter().all(|c| !c.binary || (c.lower, c.upper) == (0.0, 1.0)));
    }

    #[test]
    fn single_robot_has_no_zone_columns() {
        let m = build_model(&[robot(1, 30.0, 0.0)], &[], Discretization::new(1.0, 10).unwrap(), ModelOptions::default())
            .unwrap();
        assert!(m
            .columns
            .iter()
            .all(|c| !matches!(c.index, VarIndex::Pi { .. } | VarIndex::Eps { .. })));
    }

    #[test]
    fn tight_big_m_values() {
        // s in [-30, 480]: 30 m region, 15 m/s for 30 steps of 1 s
        let m = build_model(&[robot(1, 30.0, 3.0)], &[], Discretization::new(1.0, 30).unwrap(), ModelOptions::default())
            .unwrap();
        let s = m.id(VarIndex::S { robot: RobotId(1), k: 5 });
        assert_eq!((m.columns[s].lower, m.columns[s].upper), (-30.0, 480.0));
        let find = |f: Family| {
            m.rows
                .iter()
                .find(|r| r.family == f && r.coeffs.iter().any(|&(c, _)| c == s))
                .unwrap()
        };
        assert_eq!(find(Family::H1).big_m, 480.0);
        assert_eq!(find(Family::H4).big_m, 60.0);
        let b2 = m.rows.iter().find(|r| r.family == Family::B2 && r.sense == Sense::Ge).unwrap();
        assert_eq!(b2.big_m, 15.0);
    }

    #[test]
    fn initial_position_row() {
        let m = build_model(&[robot(1, 30.0, 2.0)], &[], Discretization::new(1.0, 10).unwrap(), ModelOptions::default())
            .unwrap();
        let b3 = m.rows.iter().find(|r| r.family == Family::B3).unwrap();
        assert_eq!(b3.rhs, -20.0);
    }

    #[test]
    fn priority_rows_sum_to_one() {
        let robots = [robot(1, 30.0, 0.0), robot(2, 30.0, 0.0)];
        let m = build_model(&robots, &[crossing()], Discretization::new(1.0, 4).unwrap(), ModelOptions::default())
            .unwrap();
        let h5: Vec<_> = m.rows.iter().filter(|r| r.family == Family::H5).collect();
        assert_eq!(h5.len(), 1);
        assert_eq!((h5[0].sense, h5[0].rhs), (Sense::Eq, 1.0));
        assert_eq!(h5[0].coeffs.len(), 2);
    }

    #[test]
    fn build_errors() {
        let d = Discretization { tau: 1.0, k: 5 };
        let dup = [robot(1, 30.0, 0.0), robot(1, 30.0, 0.0)];
        assert_eq!(
            build_model(&dup, &[], d, ModelOptions::default()).unwrap_err(),
            ModelError::DuplicateRobot(RobotId(1))
        );
        assert!(matches!(
            build_model(&[robot(1, 30.0, 0.0)], &[crossing()], d, ModelOptions::default()),
            Err(ModelError::UnknownRobot { robot: RobotId(2), .. })
        ));
        let bad = Discretization { tau: 0.0, k: 5 };
        assert!(matches!(
            build_model(&[robot(1, 30.0, 0.0)], &[], bad, ModelOptions::default()),
            Err(ModelError::InvalidTau(_))
        ));
    }

    #[test]
    fn covering_discretization() {
        let robots = [robot(1, 30.0, 0.0), robot(2, 30.0, 2.5)];
        let d = Discretization::covering(&robots, 0.5, 30.0).unwrap();
        assert_eq!(d.k, 65);
        let d = Discretization::covering(&robots, 0.3, 30.0).unwrap();
        assert_eq!(d.k, 109);
    }
}
