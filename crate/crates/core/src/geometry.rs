//! Planar primitives: points, segments and convex polygons.
//!
//! Polygons are stored counterclockwise. Every constructor validates
//! convexity and a nonzero area, so downstream code can rely on the
//! invariants without re-checking them.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used by geometric predicates (containment, convexity).
pub const PREDICATE_TOL: f64 = 1e-12;
/// Tolerance used when comparing metric quantities (lengths, areas, times).
pub const METRIC_TOL: f64 = 1e-9;
/// Polygons with less area than this are treated as empty.
pub const MIN_AREA: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("non-finite coordinate in polygon")]
    NonFinite,
    #[error("polygon is degenerate (area {0:e})")]
    Degenerate(f64),
    #[error("polygon is not convex (turn at vertex {0})")]
    NotConvex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn lerp(self, other: Point, s: f64) -> Point {
        self + (other - self) * s
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// A straight motion leg. Zero-length segments are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
}

impl Segment {
    pub const fn new(start: Point, end: Point) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    /// Euclidean distance from `q` to the closest point of the segment.
    pub fn distance_to(&self, q: Point) -> f64 {
        let d = self.end - self.start;
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return self.start.distance(q);
        }
        let s = ((q - self.start).dot(d) / len2).clamp(0.0, 1.0);
        self.start.lerp(self.end, s).distance(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn of_points<I: IntoIterator<Item = Point>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bb = BoundingBox { min: first, max: first };
        for p in it {
            bb.min.x = bb.min.x.min(p.x);
            bb.min.y = bb.min.y.min(p.y);
            bb.max.x = bb.max.x.max(p.x);
            bb.max.y = bb.max.y.max(p.y);
        }
        Some(bb)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        self.min.lerp(self.max, 0.5)
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.width().hypot(self.height())
    }

    pub fn inflate(&self, by: f64) -> BoundingBox {
        BoundingBox {
            min: Point::new(self.min.x - by, self.min.y - by),
            max: Point::new(self.max.x + by, self.max.y + by),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Convex polygon with counterclockwise vertex order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
    #[serde(skip)]
    area: f64,
}

fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        twice += vertices[i].cross(vertices[(i + 1) % n]);
    }
    0.5 * twice
}

fn dedup_ring(points: &mut Vec<Point>) {
    points.dedup_by(|a, b| a.distance(*b) <= PREDICATE_TOL);
    while points.len() > 1 && points[0].distance(points[points.len() - 1]) <= PREDICATE_TOL {
        points.pop();
    }
}

impl ConvexPolygon {
    /// Builds a polygon from vertices in either orientation.
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let mut vertices = vertices;
        dedup_ring(&mut vertices);
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        let mut area = signed_area(&vertices);
        if area.abs() <= MIN_AREA {
            return Err(GeometryError::Degenerate(area.abs()));
        }
        if area < 0.0 {
            vertices.reverse();
            area = -area;
        }
        let n = vertices.len();
        let scale = BoundingBox::of_points(vertices.iter().copied())
            .map(|b| b.width().max(b.height()))
            .unwrap_or(1.0);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) < -PREDICATE_TOL * scale * scale {
                return Err(GeometryError::NotConvex((i + 1) % n));
            }
        }
        Ok(Self { vertices, area })
    }

    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0).expect("unit square is valid")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Shoelace area; strictly positive by construction.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Largest pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(a.distance(*b));
            }
        }
        best
    }

    /// Closed-set containment.
    pub fn contains(&self, q: Point) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = b - a;
            edge.cross(q - a) >= -PREDICATE_TOL * edge.norm().max(1.0)
        })
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of_points(self.vertices.iter().copied()).expect("nonempty polygon")
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].distance(self.vertices[(i + 1) % n]))
            .sum()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let w = a.cross(b);
            cx += (a.x + b.x) * w;
            cy += (a.y + b.y) * w;
        }
        let k = 1.0 / (6.0 * self.area);
        Point::new(cx * k, cy * k)
    }

    /// Largest distance from `p` to any point of the polygon.
    pub fn farthest_distance(&self, p: Point) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.distance(p))
            .fold(0.0, f64::max)
    }

    /// Keeps the part of the polygon where `normal · p <= offset`.
    pub fn clip_half_plane(&self, normal: Point, offset: f64) -> Option<ConvexPolygon> {
        clip_ring(&self.vertices, normal, offset).and_then(Self::from_clip)
    }

    /// Intersection with another convex polygon, `None` when it has no area.
    pub fn intersection(&self, other: &ConvexPolygon) -> Option<ConvexPolygon> {
        let mut ring = self.vertices.clone();
        let n = other.vertices.len();
        for i in 0..n {
            let a = other.vertices[i];
            let b = other.vertices[(i + 1) % n];
            // Inside of a CCW edge is its left side: cross(b - a, p - a) >= 0.
            let edge = b - a;
            let normal = Point::new(edge.y, -edge.x);
            ring = clip_ring(&ring, normal, normal.dot(a))?;
        }
        Self::from_clip(ring)
    }

    /// Area of the intersection (zero when disjoint).
    pub fn intersection_area(&self, other: &ConvexPolygon) -> f64 {
        self.intersection(other).map_or(0.0, |p| p.area())
    }

    pub fn translated(&self, by: Point) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| *v + by).collect(),
            area: self.area,
        }
    }

    pub fn rotated(&self, angle: f64) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| v.rotated(angle)).collect(),
            area: self.area,
        }
    }

    fn from_clip(mut ring: Vec<Point>) -> Option<ConvexPolygon> {
        dedup_ring(&mut ring);
        if ring.len() < 3 {
            return None;
        }
        let area = signed_area(&ring);
        if area <= MIN_AREA {
            return None;
        }
        Some(ConvexPolygon { vertices: ring, area })
    }
}

impl<'de> Deserialize<'de> for ConvexPolygon {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<Point>,
        }
        let raw = Raw::deserialize(deserializer)?;
        ConvexPolygon::new(raw.vertices).map_err(serde::de::Error::custom)
    }
}

/// One Sutherland-Hodgman pass against `normal · p <= offset`.
fn clip_ring(ring: &[Point], normal: Point, offset: f64) -> Option<Vec<Point>> {
    let n = ring.len();
    if n == 0 {
        return None;
    }
    let scale = normal.norm().max(f64::MIN_POSITIVE);
    let side = |p: Point| (normal.dot(p) - offset) / scale;
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = ring[i];
        let next = ring[(i + 1) % n];
        let sc = side(cur);
        let sn = side(next);
        let cur_in = sc <= PREDICATE_TOL;
        let next_in = sn <= PREDICATE_TOL;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in && (sc - sn).abs() > 0.0 {
            let s = sc / (sc - sn);
            out.push(cur.lerp(next, s.clamp(0.0, 1.0)));
        }
    }
    if out.len() < 3 {
        None
    } else {
        Some(out)
    }
}

/// Earliest time in `[0, leg duration]` at which an agent moving along `leg`
/// at `speed` comes within distance `r` of `q`.
pub fn disk_entry_time(leg: &Segment, speed: f64, q: Point, r: f64) -> Option<f64> {
    debug_assert!(speed > 0.0 && r >= 0.0);
    let w = leg.start - q;
    let c = w.dot(w) - r * r;
    if c <= 0.0 {
        return Some(0.0);
    }
    let len = leg.length();
    if len == 0.0 {
        return None;
    }
    let u = (leg.end - leg.start) * (speed / len);
    let a = u.dot(u);
    let b = u.dot(w);
    if b >= 0.0 {
        // Moving away from (or tangentially past) q while still outside.
        return None;
    }
    let mut disc = b * b - a * c;
    if disc < 0.0 {
        if disc > -1e-12 * b * b {
            disc = 0.0;
        } else {
            return None;
        }
    }
    // Numerically stable smaller root of a t^2 + 2 b t + c = 0 with b < 0.
    let t = c / (-b + disc.sqrt());
    (t <= len / speed).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn hexagon() -> ConvexPolygon {
        let pts = (0..6)
            .map(|k| {
                let t = std::f64::consts::PI / 3.0 * k as f64;
                Point::new(t.cos(), t.sin())
            })
            .collect();
        ConvexPolygon::new(pts).unwrap()
    }

    #[test]
    fn areas() {
        assert!(close(ConvexPolygon::unit_square().area(), 1.0, 1e-15));
        assert!(close(ConvexPolygon::rectangle(0.0, 0.0, 2.0, 3.0).unwrap().area(), 6.0, 1e-15));
        let tri = ConvexPolygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap();
        assert!(close(tri.area(), 0.5, 1e-15));
    }

    #[test]
    fn collinear_vertices_are_rejected() {
        let err = ConvexPolygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
        ])
        .unwrap_err();
        assert!(matches!(err, GeometryError::Degenerate(_)));
    }

    #[test]
    fn nonconvex_is_rejected() {
        let err = ConvexPolygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.3),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap_err();
        assert!(matches!(err, GeometryError::NotConvex(_)));
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = ConvexPolygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(signed_area(p.vertices()) > 0.0);
    }

    #[test]
    fn diameters() {
        assert!(close(ConvexPolygon::unit_square().diameter(), 2f64.sqrt(), 1e-15));
        let thin = ConvexPolygon::rectangle(0.0, 0.0, 1.0, 1e-6).unwrap();
        assert!(close(thin.diameter(), 1.0, 1e-9));
        assert!(close(hexagon().diameter(), 2.0, 1e-12));
    }

    #[test]
    fn containment() {
        let sq = ConvexPolygon::unit_square();
        assert!(sq.contains(Point::new(0.5, 0.5)));
        assert!(!sq.contains(Point::new(1.5, 0.5)));
        assert!(sq.contains(Point::new(1.0, 0.5)));
    }

    #[test]
    fn disk_entry_examples() {
        let leg = Segment::new(Point::new(0.0, 0.0), Point::new(2.0, 0.0));
        assert!(close(disk_entry_time(&leg, 1.0, Point::new(1.0, 0.0), 0.5).unwrap(), 0.5, 1e-12));
        assert!(close(disk_entry_time(&leg, 1.0, Point::new(1.0, 0.5), 0.5).unwrap(), 1.0, 1e-12));
        assert_eq!(disk_entry_time(&leg, 1.0, Point::new(1.0, 1.0), 0.5), None);
    }

    #[test]
    fn disk_entry_clamps_to_leg() {
        let leg = Segment::new(Point::new(0.0, 0.0), Point::new(2.0, 0.0));
        // Already inside at the start.
        assert_eq!(disk_entry_time(&leg, 1.0, Point::new(0.1, 0.1), 0.5), Some(0.0));
        // Would enter only after the leg ends.
        assert_eq!(disk_entry_time(&leg, 1.0, Point::new(3.0, 0.0), 0.5), None);
        // Behind the agent.
        assert_eq!(disk_entry_time(&leg, 1.0, Point::new(-1.0, 0.0), 0.5), None);
        // Speed scales time.
        assert!(close(disk_entry_time(&leg, 2.0, Point::new(1.0, 0.0), 0.5).unwrap(), 0.25, 1e-12));
    }

    #[test]
    fn intersection_of_overlapping_squares() {
        let a = ConvexPolygon::unit_square();
        let b = ConvexPolygon::rectangle(0.5, 0.5, 1.5, 1.5).unwrap();
        assert!(close(a.intersection_area(&b), 0.25, 1e-12));
        let c = ConvexPolygon::rectangle(2.0, 2.0, 3.0, 3.0).unwrap();
        assert!(a.intersection(&c).is_none());
        // Touching along an edge has no area.
        let d = ConvexPolygon::rectangle(1.0, 0.0, 2.0, 1.0).unwrap();
        assert!(a.intersection(&d).is_none());
    }

    #[test]
    fn half_plane_clip() {
        let sq = ConvexPolygon::unit_square();
        let left = sq.clip_half_plane(Point::new(1.0, 0.0), 0.25).unwrap();
        assert!(close(left.area(), 0.25, 1e-12));
        assert!(sq.clip_half_plane(Point::new(1.0, 0.0), -0.1).is_none());
    }

    #[test]
    fn centroid_of_rectangle() {
        let r = ConvexPolygon::rectangle(1.0, 2.0, 3.0, 6.0).unwrap();
        let c = r.centroid();
        assert!(close(c.x, 2.0, 1e-12) && close(c.y, 4.0, 1e-12));
    }
}
