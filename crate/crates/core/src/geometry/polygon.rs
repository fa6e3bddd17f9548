use serde::{Deserialize, Serialize};

use super::{CollisionSamples, GeometryError};

const TOL: f64 = 1e-7;

/// Convex polygon in the `(s_i, s_j)` plane whose edges are horizontal,
/// vertical or parallel to `s_i = s_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionPolygon {
    /// Counter-clockwise vertices.
    pub vertices: Vec<(f64, f64)>,
    /// `(s_i^out, s_j^out)` when known; vertices then lie inside the box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<(f64, f64)>,
}

/// Support values of a polygon in the three admissible edge directions:
/// `a` is `s_i`, `b` is `s_j`, `d` is `s_j - s_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalBounds {
    pub a_lo: f64,
    pub a_hi: f64,
    pub b_lo: f64,
    pub b_hi: f64,
    pub d_lo: f64,
    pub d_hi: f64,
}

impl DirectionalBounds {
    pub fn of_points(points: impl IntoIterator<Item = (f64, f64)>) -> Option<Self> {
        let mut it = points.into_iter().peekable();
        it.peek()?;
        let mut bounds = DirectionalBounds {
            a_lo: f64::INFINITY,
            a_hi: f64::NEG_INFINITY,
            b_lo: f64::INFINITY,
            b_hi: f64::NEG_INFINITY,
            d_lo: f64::INFINITY,
            d_hi: f64::NEG_INFINITY,
        };
        for (a, b) in it {
            bounds.a_lo = bounds.a_lo.min(a);
            bounds.a_hi = bounds.a_hi.max(a);
            bounds.b_lo = bounds.b_lo.min(b);
            bounds.b_hi = bounds.b_hi.max(b);
            bounds.d_lo = bounds.d_lo.min(b - a);
            bounds.d_hi = bounds.d_hi.max(b - a);
        }
        Some(bounds)
    }

    pub fn inflated(self, margin: f64) -> Self {
        DirectionalBounds {
            a_lo: self.a_lo - margin,
            a_hi: self.a_hi + margin,
            b_lo: self.b_lo - margin,
            b_hi: self.b_hi + margin,
            d_lo: self.d_lo - margin,
            d_hi: self.d_hi + margin,
        }
    }
}

/// Clips a convex polygon by the half-plane `n . p <= c`.
fn clip(poly: &[(f64, f64)], n: (f64, f64), c: f64) -> Vec<(f64, f64)> {
    let side = |p: (f64, f64)| n.0 * p.0 + n.1 * p.1 - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let (sp, sq) = (side(p), side(q));
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

fn simplify(mut poly: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    // drop repeated points
    let mut k = 0;
    while poly.len() > 1 && k < poly.len() {
        let next = (k + 1) % poly.len();
        let (p, q) = (poly[k], poly[next]);
        if (p.0 - q.0).abs() < TOL && (p.1 - q.1).abs() < TOL {
            poly.remove(next);
        } else {
            k += 1;
        }
    }
    // drop collinear points
    let mut k = 0;
    while poly.len() > 2 && k < poly.len() {
        let n = poly.len();
        let (p, q, r) = (poly[(k + n - 1) % n], poly[k], poly[(k + 1) % n]);
        let cross = (q.0 - p.0) * (r.1 - q.1) - (q.1 - p.1) * (r.0 - q.0);
        if cross.abs() < TOL {
            poly.remove(k);
        } else {
            k += 1;
        }
    }
    poly
}

impl CollisionPolygon {
    pub fn new(
        vertices: Vec<(f64, f64)>,
        domain: Option<(f64, f64)>,
    ) -> Result<Self, GeometryError> {
        let poly = CollisionPolygon { vertices, domain };
        poly.validate()?;
        Ok(poly)
    }

    /// Smallest admissible polygon with the given support values.
    pub fn from_bounds(
        bounds: DirectionalBounds,
        domain: Option<(f64, f64)>,
    ) -> Result<Self, GeometryError> {
        let DirectionalBounds {
            a_lo,
            a_hi,
            b_lo,
            b_hi,
            d_lo,
            d_hi,
        } = bounds;
        let rect = vec![(a_lo, b_lo), (a_hi, b_lo), (a_hi, b_hi), (a_lo, b_hi)];
        // b - a >= d_lo  <=>  a - b <= -d_lo
        let poly = clip(&rect, (1.0, -1.0), -d_lo);
        let poly = clip(&poly, (-1.0, 1.0), d_hi);
        Self::new(simplify(poly), domain)
    }

    /// Minimal admissible polygon containing `points`, grown by `margin` in
    /// every edge direction and clipped to `domain` when given.
    pub fn bounding(
        points: impl IntoIterator<Item = (f64, f64)>,
        margin: f64,
        domain: Option<(f64, f64)>,
    ) -> Result<Self, GeometryError> {
        let mut bounds = DirectionalBounds::of_points(points)
            .ok_or(GeometryError::EmptySamples)?
            .inflated(margin);
        if let Some((ai, bj)) = domain {
            bounds.a_lo = bounds.a_lo.max(0.0);
            bounds.b_lo = bounds.b_lo.max(0.0);
            bounds.a_hi = bounds.a_hi.min(ai);
            bounds.b_hi = bounds.b_hi.min(bj);
        }
        Self::from_bounds(bounds, domain)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let v = &self.vertices;
        let bad = |why: String| Err(GeometryError::InvalidPolygon(why));
        if v.len() < 3 {
            return bad(format!("{} vertices, need at least 3", v.len()));
        }
        if v.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return bad("non-finite vertex".into());
        }
        let n = v.len();
        let mut area2 = 0.0;
        for k in 0..n {
            let p = v[k];
            let q = v[(k + 1) % n];
            let r = v[(k + 2) % n];
            let (dx, dy) = (q.0 - p.0, q.1 - p.1);
            let scale = dx.abs().max(dy.abs());
            if scale < TOL {
                return bad(format!("repeated vertex at index {}", (k + 1) % n));
            }
            let admissible =
                dx.abs() < TOL * scale.max(1.0) || dy.abs() < TOL * scale.max(1.0) || (dx - dy).abs() < TOL * scale.max(1.0);
            if !admissible {
                return bad(format!(
                    "edge {k} from {p:?} to {q:?} is neither axis-parallel nor diagonal"
                ));
            }
            let turn = dx * (r.1 - q.1) - dy * (r.0 - q.0);
            if turn < -TOL {
                return bad(format!("not convex counter-clockwise at vertex {}", (k + 1) % n));
            }
            area2 += p.0 * q.1 - q.0 * p.1;
        }
        if area2 <= 0.0 {
            return bad("polygon has no area or is clockwise".into());
        }
        if let Some((ai, bj)) = self.domain {
            if v
                .iter()
                .any(|p| p.0 < -TOL || p.1 < -TOL || p.0 > ai + TOL || p.1 > bj + TOL)
            {
                return bad(format!("vertex outside [0, {ai}] x [0, {bj}]"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> DirectionalBounds {
        DirectionalBounds::of_points(self.vertices.iter().copied()).expect("validated polygon")
    }

    /// Closed membership test with a small tolerance.
    pub fn contains(&self, a: f64, b: f64) -> bool {
        let v = &self.vertices;
        let n = v.len();
        (0..n).all(|k| {
            let p = v[k];
            let q = v[(k + 1) % n];
            (q.0 - p.0) * (b - p.1) - (q.1 - p.1) * (a - p.0) >= -1e-9
        })
    }

    /// Euclidean distance from `(a, b)` to the polygon when outside, minus
    /// the depth below the nearest edge when inside.
    pub fn signed_distance(&self, a: f64, b: f64) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        let mut depth = f64::INFINITY;
        let mut dist = f64::INFINITY;
        let mut inside = true;
        for k in 0..n {
            let p = v[k];
            let q = v[(k + 1) % n];
            let (dx, dy) = (q.0 - p.0, q.1 - p.1);
            let len = dx.hypot(dy);
            let side = (dx * (b - p.1) - dy * (a - p.0)) / len;
            if side < 0.0 {
                inside = false;
            }
            depth = depth.min(side);
            let u = (((a - p.0) * dx + (b - p.1) * dy) / (len * len)).clamp(0.0, 1.0);
            dist = dist.min((a - p.0 - u * dx).hypot(b - p.1 - u * dy));
        }
        if inside {
            -depth
        } else {
            dist
        }
    }

    /// The same polygon with the two robots' roles exchanged.
    pub fn transpose(&self) -> CollisionPolygon {
        // mirroring reverses orientation
        let mut vertices: Vec<_> = self.vertices.iter().map(|&(a, b)| (b, a)).collect();
        vertices.reverse();
        CollisionPolygon {
            vertices,
            domain: self.domain.map(|(a, b)| (b, a)),
        }
    }

    pub fn translated(&self, da: f64, db: f64) -> CollisionPolygon {
        CollisionPolygon {
            vertices: self.vertices.iter().map(|&(a, b)| (a + da, b + db)).collect(),
            domain: None,
        }
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        0.5 * (0..n)
            .map(|k| v[k].0 * v[(k + 1) % n].1 - v[(k + 1) % n].0 * v[k].1)
            .sum::<f64>()
    }
}

/// Bounding polygon of a sample set, grown by one grid step so that the
/// continuous set between samples is covered.
pub fn bounding_polygon(samples: &CollisionSamples) -> Result<CollisionPolygon, GeometryError> {
    CollisionPolygon::bounding(samples.points(), samples.resolution, Some(samples.extent))
}
