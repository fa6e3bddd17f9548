#![allow(dead_code)]

use std::collections::BTreeMap;

use pathcoord::geometry::{
    AbstractPath, CollisionPolygon, Conflict, DirectionalBounds, FollowingDistance, RobotId, RobotPath, RobotSpec,
};
use pathcoord::model::{Bound, Family, MilpModel, Part, Sense, Side, VarIndex, EPS_ROLES};

pub fn robot(id: u32, s_out: f64, t_in: f64, v_in: f64, v_out: f64) -> RobotSpec {
    RobotSpec {
        id: RobotId(id),
        path: RobotPath::Abstract(AbstractPath { s_out }),
        s_out,
        t_in,
        v_in,
        v_out,
        v_max: 15.0,
        a_min: -3.0,
        a_max: 4.0,
        s_init: None,
    }
}

pub fn crossing(id: usize, a: u32, b: u32) -> Conflict {
    let poly = CollisionPolygon::new(
        vec![(10.0, 12.0), (17.0, 12.0), (17.0, 19.0), (10.0, 19.0)],
        Some((30.0, 30.0)),
    )
    .unwrap();
    Conflict::from_polygon(id, (RobotId(a), RobotId(b)), &poly, FollowingDistance::default()).unwrap()
}

pub fn merge(id: usize, a: u32, b: u32) -> Conflict {
    let poly = CollisionPolygon::from_bounds(
        DirectionalBounds {
            a_lo: 8.0,
            a_hi: 30.0,
            b_lo: 10.0,
            b_hi: 30.0,
            d_lo: -4.0,
            d_hi: 12.0,
        },
        Some((30.0, 30.0)),
    )
    .unwrap();
    Conflict::from_polygon(id, (RobotId(a), RobotId(b)), &poly, FollowingDistance::default()).unwrap()
}

/// Row count per family predicted from the robot, step and zone counts.
pub fn expected_family_counts(m: &MilpModel, cuts: bool) -> BTreeMap<Family, usize> {
    let n = m.robots.len();
    let k = m.meta.k as usize;
    let (mut perp, mut par) = (0, 0);
    for c in &m.conflicts {
        for z in [&c.forward, &c.backward] {
            perp += z.has_perp() as usize;
            par += z.has_par() as usize;
        }
    }
    let roles = 2 * perp + 2 * par;
    let mut e = BTreeMap::new();
    for f in [Family::H1, Family::H2, Family::H3, Family::H4] {
        e.insert(f, n * (k + 1));
    }
    e.insert(Family::HEps, 2 * (k + 1) * roles);
    e.insert(Family::H5, m.conflicts.len());
    e.insert(Family::B1, 2 * n * k);
    e.insert(Family::B2, 2 * n * k);
    for f in [Family::B3, Family::B4, Family::B5] {
        e.insert(f, n);
    }
    e.insert(Family::K1, 2 * n * k);
    e.insert(Family::K2, n * k);
    e.insert(Family::K3, n * k);
    e.insert(Family::S1, perp * k);
    e.insert(Family::S2, par * k);
    e.insert(Family::S3, par * k);
    if cuts {
        e.insert(Family::Cut, 2 * n * k + roles * k);
    }
    e.retain(|_, v| *v > 0);
    e
}

/// Recomputes every big-M from the column bounds with plain interval
/// arithmetic and checks each row is the intended implication. Returns the
/// number of rows checked.
pub fn check_big_m(m: &MilpModel) -> Result<usize, String> {
    let mut checked = 0;
    for row in m.rows.iter().filter(|r| !r.literals.is_empty()) {
        let lit_cols: Vec<usize> = row.literals.iter().map(|l| l.col).collect();
        let expr: Vec<(usize, f64)> = row.coeffs.iter().copied().filter(|(c, _)| !lit_cols.contains(c)).collect();
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(c, a) in &expr {
            let col = &m.columns[c];
            let (x, y) = (a * col.lower, a * col.upper);
            lo += x.min(y);
            hi += x.max(y);
        }
        let active = row.literals.iter().filter(|l| l.active).count() as f64;
        let (rhs, want) = match row.sense {
            Sense::Le => {
                let rhs = row.rhs - row.big_m * active;
                (rhs, (hi - rhs).max(0.0))
            }
            Sense::Ge => {
                let rhs = row.rhs + row.big_m * active;
                (rhs, (rhs - lo).max(0.0))
            }
            Sense::Eq => return Err("implication left as an equality".into()),
        };
        if (row.big_m - want).abs() >= 1e-9 {
            return Err(format!("{:?}: M {} expected {}", row.family, row.big_m, want));
        }
        // each literal carries exactly +-M
        for l in &row.literals {
            let coef: f64 = row.coeffs.iter().filter(|(c, _)| *c == l.col).map(|(_, a)| a).sum();
            if (coef.abs() - row.big_m).abs() >= 1e-9 {
                return Err(format!("{:?}: literal coefficient {coef} for M {}", row.family, row.big_m));
            }
        }
        // with one literal switched off the row holds at every bound corner
        let slack = match row.sense {
            Sense::Le => rhs + row.big_m - hi,
            _ => lo + row.big_m - rhs,
        };
        if slack < -1e-9 {
            return Err(format!("{:?} not relaxed by one literal", row.family));
        }
        checked += 1;
    }
    Ok(checked)
}

struct Hand {
    x: Vec<f64>,
}

impl Hand {
    fn set(&mut self, m: &MilpModel, v: VarIndex, value: f64) {
        self.x[m.id(v)] = value;
    }
}

/// Values for robots driving the given per-step speed profiles, with
/// every indicator set from the positions.
pub fn hand_built(m: &MilpModel, speeds: &BTreeMap<RobotId, Vec<f64>>, priority: &[(usize, RobotId)]) -> Vec<f64> {
    let tau = m.meta.tau;
    let mut h = Hand {
        x: vec![0.0; m.columns.len()],
    };
    let mut pos = BTreeMap::new();
    for r in &m.robots {
        let v = &speeds[&r.id];
        let mut s = vec![pathcoord::model::initial_abscissa(r)];
        for k in 1..v.len() {
            s.push(s[k - 1] + 0.5 * tau * (v[k - 1] + v[k]));
        }
        for k in 0..=m.meta.k {
            let robot = r.id;
            let sk = s[k as usize];
            h.set(m, VarIndex::S { robot, k }, sk);
            h.set(m, VarIndex::V { robot, k }, v[k as usize]);
            h.set(m, VarIndex::Mu { robot, k }, (sk >= 0.0) as u8 as f64);
            h.set(m, VarIndex::Sigma { robot, k }, (sk >= r.s_out) as u8 as f64);
        }
        pos.insert(r.id, s);
    }
    for c in &m.conflicts {
        let leader = priority.iter().find(|(id, _)| *id == c.id).unwrap().1;
        let follower = if leader == c.first() { c.second() } else { c.first() };
        h.set(m, VarIndex::Pi { conflict: c.id, leader, follower }, 1.0);
        for zone in [&c.forward, &c.backward] {
            for (part, bound, side) in EPS_ROLES {
                let used = match part {
                    Part::Par => zone.has_par(),
                    Part::Perp => zone.has_perp(),
                };
                if !used {
                    continue;
                }
                let thr = match (part, bound, side) {
                    (Part::Perp, Bound::Out, Side::I) => zone.s_perp_hi_i,
                    (Part::Perp, Bound::In, Side::J) => zone.s_perp_lo_j,
                    (Part::Par, Bound::In, Side::J) => zone.s_par_lo_j,
                    (Part::Par, Bound::Out, Side::I) => zone.s_par_hi_i,
                    _ => unreachable!(),
                };
                let who = if side == Side::I { zone.robot_i } else { zone.robot_j };
                for k in 0..=m.meta.k {
                    let on = pos[&who][k as usize] >= thr;
                    h.set(
                        m,
                        VarIndex::Eps {
                            conflict: c.id,
                            leader: zone.robot_i,
                            part,
                            bound,
                            side,
                            k,
                        },
                        on as u8 as f64,
                    );
                }
            }
        }
    }
    h.x
}

