//! Planar geometry primitives shared by the scenario model, controllers and metrics.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or displacement in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `angle`.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product; positive when `other` is to the left of `self`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    /// Left-hand normal (rotated +90°).
    pub fn perp(self) -> Self {
        Self {
            x: -self.y,
            y: self.x,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Vec2, alpha: f64) -> Self {
        self + (other - self) * alpha
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into the half-open interval (-π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let wrapped = theta - 2.0 * PI * (theta / (2.0 * PI)).round();
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Position plus heading in a right-handed frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading: wrap_angle(heading),
        }
    }

    /// Maps a point expressed in this pose's local frame into the parent frame.
    pub fn to_world(&self, local: Vec2) -> Vec2 {
        self.position + local.rotate(self.heading)
    }

    /// Maps a parent-frame point into this pose's local frame (x forward, y left).
    pub fn to_local(&self, world: Vec2) -> Vec2 {
        (world - self.position).rotate(-self.heading)
    }

    /// Expresses `other` (parent frame) relative to this pose.
    pub fn relative(&self, other: &Pose2) -> Pose2 {
        Pose2 {
            position: self.to_local(other.position),
            heading: wrap_angle(other.heading - self.heading),
        }
    }

    /// Composes a local pose onto this one.
    pub fn compose(&self, local: &Pose2) -> Pose2 {
        Pose2 {
            position: self.to_world(local.position),
            heading: wrap_angle(self.heading + local.heading),
        }
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }
}

/// Rectangle footprint centred on a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedBox {
    pub fn new(pose: Pose2, length: f64, width: f64) -> Self {
        Self {
            center: pose.position,
            heading: pose.heading,
            length,
            width,
        }
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let f = Vec2::from_angle(self.heading) * (self.length * 0.5);
        let l = Vec2::from_angle(self.heading).perp() * (self.width * 0.5);
        [
            self.center + f + l,
            self.center - f + l,
            self.center - f - l,
            self.center + f - l,
        ]
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }

    /// Separating-axis overlap test; touching boxes count as overlapping.
    pub fn overlaps(&self, other: &OrientedBox) -> bool {
        let reach = self.circumradius() + other.circumradius();
        if (self.center - other.center).norm_sq() > reach * reach {
            return false;
        }
        let a = self.corners();
        let b = other.corners();
        let axes = [
            Vec2::from_angle(self.heading),
            Vec2::from_angle(self.heading).perp(),
            Vec2::from_angle(other.heading),
            Vec2::from_angle(other.heading).perp(),
        ];
        for axis in axes {
            let (amin, amax) = project_onto(&a, axis);
            let (bmin, bmax) = project_onto(&b, axis);
            if amax < bmin || bmax < amin {
                return false;
            }
        }
        true
    }

    /// Minimum Euclidean distance between the two rectangles, 0 when they overlap.
    pub fn distance(&self, other: &OrientedBox) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let a = self.corners();
        let b = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let (a0, a1) = (a[i], a[(i + 1) % 4]);
            let (b0, b1) = (b[i], b[(i + 1) % 4]);
            for p in b {
                best = best.min(point_segment_distance(p, a0, a1));
            }
            for p in a {
                best = best.min(point_segment_distance(p, b0, b1));
            }
        }
        best
    }

    /// Local-frame coordinates of a world point relative to the box centre.
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.heading)
    }
}

fn project_onto(points: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        let d = p.dot(axis);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (shared endpoints and collinear overlap count).
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// Point-in-polygon by crossing number; points on the boundary count as inside.
/// `ring` may or may not repeat its first vertex at the end.
pub fn point_in_ring(p: Vec2, ring: &[Vec2]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if point_segment_distance(p, a, b) <= 1e-12 {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True when no two non-adjacent edges of the closed ring intersect.
pub fn ring_is_simple(ring: &[Vec2]) -> bool {
    let pts: &[Vec2] = if ring.len() > 1 && ring.first() == ring.last() {
        &ring[..ring.len() - 1]
    } else {
        ring
    };
    let n = pts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a0, a1) = (pts[i], pts[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (b0, b1) = (pts[j], pts[(j + 1) % n]);
            if segments_intersect(a0, a1, b0, b1) {
                return false;
            }
        }
    }
    true
}

/// Axis-aligned bounding box, used to prune polygon tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn from_points(points: &[Vec2]) -> Self {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Self { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub segment: usize,
    /// Arclength of the foot point from the polyline start.
    pub arclength: f64,
    /// Unsigned distance from the point to the foot point.
    pub distance: f64,
    /// Signed lateral offset, positive to the left of the travel direction.
    pub lateral: f64,
    /// Tangent heading of the nearest segment.
    pub heading: f64,
    pub foot: Vec2,
}

/// Polyline with cached cumulative arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += p.distance(points[i - 1]);
            }
            cumulative.push(acc);
        }
        Self { points, cumulative }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Nearest-point projection. Returns `None` for polylines with fewer than two points.
    pub fn project(&self, p: Vec2) -> Option<Projection> {
        if self.points.len() < 2 {
            return None;
        }
        let mut best: Option<Projection> = None;
        let mut best_d2 = f64::INFINITY;
        for i in 0..self.points.len() - 1 {
            let a = self.points[i];
            let b = self.points[i + 1];
            let ab = b - a;
            let len_sq = ab.norm_sq();
            if len_sq == 0.0 {
                continue;
            }
            let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
            let foot = a + ab * t;
            let d2 = (p - foot).norm_sq();
            if d2 < best_d2 {
                best_d2 = d2;
                let len = len_sq.sqrt();
                let side = ab.cross(p - a);
                let dist = d2.sqrt();
                best = Some(Projection {
                    segment: i,
                    arclength: self.cumulative[i] + t * len,
                    distance: dist,
                    lateral: if side < 0.0 { -dist } else { dist },
                    heading: ab.angle(),
                    foot,
                });
            }
        }
        best
    }

    /// Point at a given arclength, clamped to the polyline; also returns the local tangent heading.
    pub fn sample(&self, s: f64) -> (Vec2, f64) {
        let n = self.points.len();
        if n == 1 {
            return (self.points[0], 0.0);
        }
        let s = s.clamp(0.0, self.length());
        let idx = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            k => (k - 1).min(n - 2),
        };
        let a = self.points[idx];
        let b = self.points[idx + 1];
        let seg = self.cumulative[idx + 1] - self.cumulative[idx];
        let t = if seg > 0.0 {
            (s - self.cumulative[idx]) / seg
        } else {
            0.0
        };
        (a.lerp(b, t), (b - a).angle())
    }

    /// Like [`Polyline::sample`] but extrapolates linearly past either end.
    pub fn sample_extrapolated(&self, s: f64) -> (Vec2, f64) {
        let n = self.points.len();
        if n < 2 {
            return self.sample(s);
        }
        if s < 0.0 {
            let dir = (self.points[1] - self.points[0]).angle();
            return (self.points[0] + Vec2::from_angle(dir) * s, dir);
        }
        let len = self.length();
        if s > len {
            let dir = (self.points[n - 1] - self.points[n - 2]).angle();
            return (self.points[n - 1] + Vec2::from_angle(dir) * (s - len), dir);
        }
        self.sample(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
        assert_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn pose_round_trip() {
        let pose = Pose2::new(3.0, -2.0, 0.7);
        let p = Vec2::new(1.5, 4.0);
        let back = pose.to_world(pose.to_local(p));
        assert!((back - p).norm() < 1e-12);
        let other = Pose2::new(-1.0, 2.0, -2.5);
        let rel = pose.relative(&other);
        let re = pose.compose(&rel);
        assert!((re.position - other.position).norm() < 1e-12);
        assert!(wrap_angle(re.heading - other.heading).abs() < 1e-12);
    }

    #[test]
    fn box_overlap_and_distance() {
        let a = OrientedBox::new(Pose2::new(0.0, 0.0, 0.0), 4.0, 2.0);
        let b = OrientedBox::new(Pose2::new(10.0, 0.0, 0.0), 4.0, 2.0);
        assert!(!a.overlaps(&b));
        assert!((a.distance(&b) - 6.0).abs() < 1e-12);
        assert!(a.overlaps(&a));
        let c = OrientedBox::new(Pose2::new(3.0, 1.0, 0.8), 4.0, 2.0);
        assert!(a.overlaps(&c));
        assert_eq!(a.distance(&c), 0.0);
    }

    #[test]
    fn point_in_ring_boundary_inside() {
        let ring = [
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(4.0, 2.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(0.0, 0.0),
        ];
        assert!(point_in_ring(Vec2::new(1.0, 1.0), &ring));
        assert!(point_in_ring(Vec2::new(4.0, 1.0), &ring));
        assert!(point_in_ring(Vec2::new(0.0, 0.0), &ring));
        assert!(!point_in_ring(Vec2::new(4.01, 1.0), &ring));
        assert!(ring_is_simple(&ring));
        let bowtie = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(0.0, 0.0),
        ];
        assert!(!ring_is_simple(&bowtie));
    }

    #[test]
    fn polyline_projection_sign() {
        let line = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]);
        let p = line.project(Vec2::new(3.0, 1.0)).unwrap();
        assert_eq!(p.lateral, 1.0);
        assert_eq!(p.arclength, 3.0);
        assert_eq!(p.heading, 0.0);
        let q = line.project(Vec2::new(3.0, -2.0)).unwrap();
        assert_eq!(q.lateral, -2.0);
        let (pt, h) = line.sample(4.0);
        assert_eq!(pt, Vec2::new(4.0, 0.0));
        assert_eq!(h, 0.0);
        let (ext, _) = line.sample_extrapolated(12.0);
        assert_eq!(ext, Vec2::new(12.0, 0.0));
    }
}
