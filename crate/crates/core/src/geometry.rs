//! Planar and spatial primitives in a local metric frame.
//!
//! All coordinates are meters. `x` points east, `y` north and `z` up.

use serde::{Deserialize, Serialize};

/// Geometric tolerance in meters.
pub const EPS_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn lift(self, z: f64) -> Point3 {
        Point3::new(self.x, self.y, z)
    }

    pub(crate) fn sub(self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub(crate) fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub(crate) fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub(crate) fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn distance(self, other: Point3) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let dz = other.z - self.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn lerp(self, other: Point3, t: f64) -> Point3 {
        Point3::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
            self.z + (other.z - self.z) * t,
        )
    }

    /// Total order used for deterministic tie-breaking (x, then y, then z).
    pub fn lex_cmp(&self, other: &Point3) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.z.total_cmp(&other.z))
    }
}

/// Compass azimuth (degrees clockwise from north, in `(-180, 180]`) and
/// elevation (degrees above the horizon) of the direction `from -> to`.
pub fn direction_angles(from: Point3, to: Point3) -> (f64, f64) {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dz = to.z - from.z;
    let azimuth = dx.atan2(dy).to_degrees();
    let elevation = dz.atan2(dx.hypot(dy)).to_degrees();
    (wrap_degrees(azimuth), elevation)
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Unsigned angle in degrees (`[0, 180]`) between two planar directions.
/// Degenerate (zero-length) directions yield 0.
pub fn turn_angle_deg(incoming: Point2, outgoing: Point2) -> f64 {
    let n = incoming.norm() * outgoing.norm();
    if n <= 0.0 {
        return 0.0;
    }
    let cos = (incoming.dot(outgoing) / n).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

/// Signed doubled area of a polygon (positive for counter-clockwise order).
pub fn signed_area2(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].cross(poly[(i + 1) % n]))
        .sum()
}

pub fn centroid(poly: &[Point2]) -> Point2 {
    let n = poly.len() as f64;
    let (sx, sy) = poly.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Point2::new(sx / n, sy / n)
}

/// Strict point-in-polygon test. Points within [`EPS_M`] of the boundary
/// are outside.
pub fn point_strictly_inside(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    for i in 0..n {
        if point_segment_distance(p, poly[i], poly[(i + 1) % n]) <= EPS_M {
            return false;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(Point2::new(a.x + ab.x * t, a.y + ab.y * t))
}

/// Parameter `t` along `p0 -> p1` where it crosses segment `a -> b`,
/// if the two closed segments intersect at a single point.
fn crossing_param(p0: Point2, p1: Point2, a: Point2, b: Point2) -> Option<f64> {
    let r = p1.sub(p0);
    let s = b.sub(a);
    let denom = r.cross(s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let qp = a.sub(p0);
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    let tol = 1e-12;
    if (-tol..=1.0 + tol).contains(&t) && (-tol..=1.0 + tol).contains(&u) {
        Some(t.clamp(0.0, 1.0))
    } else {
        None
    }
}

/// Parameter intervals `(t0, t1)` within `[0, 1]` on which the segment
/// `p0 -> p1` lies strictly inside `poly`.
pub fn segment_inside_intervals(poly: &[Point2], p0: Point2, p1: Point2) -> Vec<(f64, f64)> {
    let len = p0.distance(p1);
    if len <= EPS_M {
        return if point_strictly_inside(poly, p0) {
            vec![(0.0, 1.0)]
        } else {
            Vec::new()
        };
    }
    let n = poly.len();
    let mut cuts = vec![0.0, 1.0];
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if let Some(t) = crossing_param(p0, p1, a, b) {
            cuts.push(t);
        }
        // Collinear overlaps contribute their vertex projections as cuts.
        for v in [a, b] {
            if point_segment_distance(v, p0, p1) <= EPS_M {
                let t = v.sub(p0).dot(p1.sub(p0)) / (len * len);
                cuts.push(t.clamp(0.0, 1.0));
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() * len <= EPS_M);

    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if (t1 - t0) * len <= EPS_M {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        let mid = Point2::new(p0.x + (p1.x - p0.x) * tm, p0.y + (p1.y - p0.y) * tm);
        if point_strictly_inside(poly, mid) {
            match out.last_mut() {
                Some(last) if (t0 - last.1).abs() * len <= EPS_M => last.1 = t1,
                _ => out.push((t0, t1)),
            }
        }
    }
    out
}

/// Whether two closed segments properly cross (interiors intersect at a
/// single point not at either segment's endpoint).
pub fn segments_properly_cross(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> bool {
    let d1 = b1.sub(b0).cross(a0.sub(b0));
    let d2 = b1.sub(b0).cross(a1.sub(b0));
    let d3 = a1.sub(a0).cross(b0.sub(a0));
    let d4 = a1.sub(a0).cross(b1.sub(a0));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn segments_touch(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> bool {
    segments_properly_cross(a0, a1, b0, b1)
        || point_segment_distance(a0, b0, b1) <= EPS_M
        || point_segment_distance(a1, b0, b1) <= EPS_M
        || point_segment_distance(b0, a0, a1) <= EPS_M
        || point_segment_distance(b1, a0, a1) <= EPS_M
}

/// A polygon is simple when no two non-adjacent edges touch and adjacent
/// edges share only their common vertex.
pub fn is_simple_polygon(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a0, a1) = (poly[i], poly[(i + 1) % n]);
        if a0.distance(a1) <= EPS_M {
            return false;
        }
        for j in (i + 1)..n {
            let (b0, b1) = (poly[j], poly[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges folding back onto each other overlap.
                let shared = if j == i + 1 { a1 } else { a0 };
                let (u, v) = if j == i + 1 { (a0, b1) } else { (a1, b0) };
                let du = u.sub(shared);
                let dv = v.sub(shared);
                if du.cross(dv).abs() <= EPS_M * du.norm().max(dv.norm()) && du.dot(dv) > 0.0 {
                    return false;
                }
            } else if segments_touch(a0, a1, b0, b1) {
                return false;
            }
        }
    }
    true
}

/// Indices of the convex vertices of a simple polygon.
pub fn convex_vertices(poly: &[Point2]) -> Vec<usize> {
    let n = poly.len();
    let orientation = signed_area2(poly).signum();
    (0..n)
        .filter(|&i| {
            let prev = poly[(i + n - 1) % n];
            let cur = poly[i];
            let next = poly[(i + 1) % n];
            cur.sub(prev).cross(next.sub(cur)) * orientation > 0.0
        })
        .collect()
}
