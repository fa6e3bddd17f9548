use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::{IntersectionTemplate, Mode, RawRobot, RawZone, Route, Scenario, ScenarioError, Settings};

/// Poisson vehicle stream on the intersection template.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModel {
    /// Vehicles per second on each route.
    pub rate: f64,
    pub speed_mean: f64,
    pub speed_std: f64,
    pub speed_lo: f64,
    pub speed_hi: f64,
    pub routes: Vec<Route>,
    /// Smallest gap between entries on the same approach lane; later
    /// arrivals closer than this are dropped.
    pub min_headway: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub template: IntersectionTemplate,
    pub settings: Settings,
}

impl Default for ArrivalModel {
    fn default() -> Self {
        ArrivalModel {
            rate: 0.05,
            speed_mean: 12.0,
            speed_std: 3.0,
            speed_lo: 10.0,
            speed_hi: 15.0,
            routes: Route::all(),
            min_headway: 1.5,
            v_max: 15.0,
            a_min: -3.0,
            a_max: 4.0,
            template: IntersectionTemplate::default(),
            settings: Settings::default(),
        }
    }
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |path: &str, reason: String| {
            Err(ScenarioError::Invalid {
                line: 0,
                path: format!("arrivals.{path}"),
                reason,
            })
        };
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate", format!("{} must be positive", self.rate));
        }
        if !(self.speed_std >= 0.0) {
            return bad("speed_std", format!("{} must be nonnegative", self.speed_std));
        }
        if !(self.speed_lo <= self.speed_hi) {
            return bad("speed_lo", format!("{} exceeds speed_hi {}", self.speed_lo, self.speed_hi));
        }
        if self.speed_lo < 0.0 || self.speed_hi > self.v_max {
            return bad(
                "speed_hi",
                format!("truncation [{}, {}] outside [0, {}]", self.speed_lo, self.speed_hi, self.v_max),
            );
        }
        if self.routes.is_empty() {
            return bad("routes", "at least one route is required".into());
        }
        Ok(())
    }

    /// Truncated normal by rejection; falls back to the interval midpoint
    /// in the (practically impossible) case of persistent rejection.
    fn speed(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.speed_std == 0.0 || self.speed_lo == self.speed_hi {
            return self.speed_mean.clamp(self.speed_lo, self.speed_hi);
        }
        let normal = Normal::new(self.speed_mean, self.speed_std).expect("validated");
        for _ in 0..100_000 {
            let v = normal.sample(rng);
            if (self.speed_lo..=self.speed_hi).contains(&v) {
                return v;
            }
        }
        0.5 * (self.speed_lo + self.speed_hi)
    }

    /// Arrivals `(t_in, route, speed)` over `[0, duration]`, time ordered,
    /// after the headway filter.
    fn arrivals(&self, duration: f64, seed: u64) -> Vec<(f64, Route, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let exp = Exp::new(self.rate).expect("validated");
        let mut raw = Vec::new();
        for &route in &self.routes {
            let mut t = exp.sample(&mut rng);
            while t <= duration {
                let v = self.speed(&mut rng);
                raw.push((round3(t), route, round3(v)));
                t += exp.sample(&mut rng);
            }
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut last: BTreeMap<super::Approach, f64> = BTreeMap::new();
        raw.retain(|&(t, route, _)| match last.get(&route.from) {
            Some(&prev) if t - prev < self.min_headway => false,
            _ => {
                last.insert(route.from, t);
                true
            }
        });
        raw
    }

    fn build(&self, arrivals: &[(f64, Route, f64)], seed: u64) -> Result<Scenario, ScenarioError> {
        let robots = arrivals
            .iter()
            .enumerate()
            .map(|(k, &(t, route, v))| RawRobot {
                id: k as u32 + 1,
                route: Some(route.to_string()),
                t_in: t,
                v_in: v,
                v_out: self.v_max,
                v_max: self.v_max,
                a_min: self.a_min,
                a_max: self.a_max,
                s_out: None,
                s_init: None,
                length: self.template.robot_length,
                width: self.template.robot_width,
                polyline: Some(self.template.polyline(route).iter().map(|p| [p.x, p.y]).collect()),
            })
            .collect();
        let settings = Settings {
            seed: Some(seed),
            ..self.settings
        };
        Scenario::from_parts(Mode::Geometric, settings, robots, Vec::new())
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Seeded vehicle stream over `duration` seconds. At least one vehicle is
/// always produced: an empty draw is extended until the first arrival.
pub fn gen_scenario(arrivals: &ArrivalModel, duration: f64, seed: u64) -> Result<Scenario, ScenarioError> {
    arrivals.validate()?;
    if !(duration > 0.0) {
        return Err(ScenarioError::Invalid {
            line: 0,
            path: "duration".into(),
            reason: format!("{duration} must be positive"),
        });
    }
    let mut window = duration;
    let list = loop {
        let list = arrivals.arrivals(window, seed);
        if !list.is_empty() {
            break if window == duration { list } else { list[..1].to_vec() };
        }
        window *= 2.0;
    };
    arrivals.build(&list, seed)
}

/// The first `n` vehicles of a seeded stream.
pub fn gen_fixed_count(arrivals: &ArrivalModel, n: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    arrivals.validate()?;
    let mut window = (n as f64 / (arrivals.rate * arrivals.routes.len() as f64)).max(1.0);
    loop {
        let list = arrivals.arrivals(window, seed);
        if list.len() >= n.max(1) {
            return arrivals.build(&list[..n.max(1)], seed);
        }
        window *= 1.5;
    }
}

/// Random abstract instance with `n` robots and up to `zones` conflicts on
/// distinct robot pairs: crossings, following bands and merges.
pub fn gen_abstract(n: usize, zones: usize, seed: u64, settings: Settings) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.random_range(lo..hi) * 2.0).round() / 2.0;
    let robots: Vec<RawRobot> = (0..n.max(1))
        .map(|k| RawRobot {
            id: k as u32 + 1,
            route: None,
            t_in: (rng.random_range(0.0..3.0f64) * 4.0).round() / 4.0,
            v_in: half(&mut rng, 10.0, 15.0),
            v_out: 15.0,
            v_max: 15.0,
            a_min: -3.0,
            a_max: 4.0,
            s_out: Some(half(&mut rng, 40.0, 70.0)),
            s_init: None,
            length: 5.0,
            width: 2.0,
            polyline: None,
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..robots.len())
        .flat_map(|i| (i + 1..robots.len()).map(move |j| (i, j)))
        .collect();
    let p = zones.min(pairs.len());
    let mut chosen: Vec<usize> = sample(&mut rng, pairs.len(), p).into_vec();
    chosen.sort_unstable();
    let raw_zones = chosen
        .into_iter()
        .map(|k| {
            let (i, j) = pairs[k];
            let (si, sj) = (robots[i].s_out.unwrap(), robots[j].s_out.unwrap());
            let x = half(&mut rng, 10.0, si - 20.0);
            let y = half(&mut rng, 10.0, sj - 20.0);
            let mut zone = RawZone {
                robots: [robots[i].id, robots[j].id],
                a_lo: Some(x),
                a_hi: None,
                b_lo: Some(y),
                b_hi: None,
                d_lo: None,
                d_hi: None,
                vertices: None,
            };
            match rng.random_range(0..3) {
                0 => {
                    zone.a_hi = Some(x + half(&mut rng, 5.0, 10.0));
                    zone.b_hi = Some(y + half(&mut rng, 5.0, 10.0));
                }
                kind => {
                    // diagonal band from (x, y) to the exit; a merge keeps
                    // a wider entry for robot j
                    zone.a_hi = Some(si);
                    zone.b_hi = Some(sj);
                    let w = 6.0;
                    zone.d_lo = Some(y - x - w);
                    zone.d_hi = Some(y - x + if kind == 2 { w + 6.0 } else { w });
                }
            }
            zone
        })
        .collect();
    Scenario::from_parts(
        Mode::Abstract,
        Settings {
            seed: Some(seed),
            ..settings
        },
        robots,
        raw_zones,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let m = ArrivalModel::default();
        let a = gen_scenario(&m, 20.0, 11).unwrap().to_toml();
        let b = gen_scenario(&m, 20.0, 11).unwrap().to_toml();
        assert_eq!(a, b);
        assert_ne!(a, gen_scenario(&m, 20.0, 12).unwrap().to_toml());
    }

    #[test]
    fn speeds_within_truncation() {
        let m = ArrivalModel {
            rate: 0.5,
            min_headway: 0.0,
            ..ArrivalModel::default()
        };
        for seed in 0..5 {
            for (_, _, v) in m.arrivals(30.0, seed) {
                assert!((10.0..=15.0).contains(&v), "{v}");
            }
        }
    }

    #[test]
    fn headway_filter_spaces_same_approach() {
        let m = ArrivalModel {
            rate: 1.0,
            ..ArrivalModel::default()
        };
        let list = m.arrivals(10.0, 3);
        for (k, a) in list.iter().enumerate() {
            for b in &list[k + 1..] {
                if a.1.from == b.1.from {
                    assert!(b.0 - a.0 >= m.min_headway);
                }
            }
        }
    }

    #[test]
    fn fixed_count_and_abstract_shapes() {
        let m = ArrivalModel::default();
        let s = gen_fixed_count(&m, 3, 5).unwrap();
        assert_eq!(s.robots.len(), 3);
        let a = gen_abstract(4, 4, 9, Settings::default()).unwrap();
        assert_eq!(a.robots.len(), 4);
        assert_eq!(a.conflicts.len(), 4);
    }

    #[test]
    fn invalid_arrivals_rejected() {
        let m = ArrivalModel {
            speed_lo: 16.0,
            speed_hi: 12.0,
            ..ArrivalModel::default()
        };
        assert!(gen_scenario(&m, 10.0, 0).is_err());
    }
}
