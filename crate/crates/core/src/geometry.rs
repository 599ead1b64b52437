//! Planar primitives shared by the risk model, the grid layout and the planner.
//!
//! All coordinates are meters in a local east/north Cartesian frame. Lateral
//! offsets in Frenet coordinates are positive to the left of the direction of
//! travel along a centerline.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Equatorial radius used by the tangent-plane transform.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate: {0}")]
    NonFinite(String),
    #[error("centerline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("centerline points {0} and {1} coincide")]
    RepeatedPoint(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn scale(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 2D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;

    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;

    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

/// Segment from `start` to `end`. A zero-length segment behaves like a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedSegment {
    pub start: Point2,
    pub end: Point2,
}

impl DirectedSegment {
    pub const fn new(start: Point2, end: Point2) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        dist_point_point(self.start, self.end)
    }

    /// Parameter in [0, 1] of the point on the segment closest to `p`.
    fn closest_param(&self, p: Point2) -> f64 {
        let dir = self.end - self.start;
        let len2 = dir.dot(dir);
        if len2 == 0.0 {
            return 0.0;
        }
        ((p - self.start).dot(dir) / len2).clamp(0.0, 1.0)
    }

    pub fn point_at(&self, t: f64) -> Point2 {
        if t == 1.0 {
            // exact endpoint; start + (end - start) can round away from it
            return self.end;
        }
        self.start + (self.end - self.start).scale(t)
    }
}

pub fn dist_point_point(a: Point2, b: Point2) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Minimum distance from `p` to the closed segment.
pub fn dist_point_segment(p: Point2, seg: &DirectedSegment) -> f64 {
    let t = seg.closest_param(p);
    dist_point_point(p, seg.point_at(t))
}

/// Minimum distance between two closed segments.
pub fn dist_segment_segment(a: &DirectedSegment, b: &DirectedSegment) -> f64 {
    if segments_intersect(a, b) {
        return 0.0;
    }
    dist_point_segment(a.start, b)
        .min(dist_point_segment(a.end, b))
        .min(dist_point_segment(b.start, a))
        .min(dist_point_segment(b.end, a))
}

fn segments_intersect(a: &DirectedSegment, b: &DirectedSegment) -> bool {
    let d1 = a.end - a.start;
    let d2 = b.end - b.start;
    let denom = d1.cross(d2);
    if denom == 0.0 {
        // parallel or degenerate; the endpoint distances cover these cases
        return false;
    }
    let w = b.start - a.start;
    let t = w.cross(d2) / denom;
    let u = w.cross(d1) / denom;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
}

/// Equirectangular tangent-plane projection around `origin = (lat0, lon0)`.
pub fn geodetic_to_local(lat: f64, lon: f64, origin: (f64, f64)) -> Result<Point2, GeometryError> {
    let (lat0, lon0) = origin;
    for (name, v) in [("lat", lat), ("lon", lon), ("lat0", lat0), ("lon0", lon0)] {
        if !v.is_finite() {
            return Err(GeometryError::NonFinite(format!("{name}={v}")));
        }
    }
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    Ok(Point2::new(
        k * (lon - lon0) * lat0.to_radians().cos(),
        k * (lat - lat0),
    ))
}

/// Inverse of [`geodetic_to_local`]; returns `(lat, lon)` in degrees.
pub fn local_to_geodetic(p: Point2, origin: (f64, f64)) -> Result<(f64, f64), GeometryError> {
    if !p.is_finite() {
        return Err(GeometryError::NonFinite(format!("{p:?}")));
    }
    let (lat0, lon0) = origin;
    let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    Ok((lat0 + p.y / k, lon0 + p.x / (k * lat0.to_radians().cos())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrenetCoord {
    pub s: f64,
    pub d: f64,
}

/// Piecewise-linear road reference line with cumulative arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct Centerline {
    points: Vec<Point2>,
    stations: Vec<f64>,
}

impl Centerline {
    pub fn new(points: Vec<Point2>) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::TooFewPoints(points.len()));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite(format!("{p:?}")));
        }
        let mut stations = Vec::with_capacity(points.len());
        stations.push(0.0);
        for i in 1..points.len() {
            let step = dist_point_point(points[i - 1], points[i]);
            if step == 0.0 {
                return Err(GeometryError::RepeatedPoint(i - 1, i));
            }
            stations.push(stations[i - 1] + step);
        }
        Ok(Self { points, stations })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn stations(&self) -> &[f64] {
        &self.stations
    }

    pub fn length(&self) -> f64 {
        *self.stations.last().expect("centerline has points")
    }

    fn segment(&self, i: usize) -> DirectedSegment {
        DirectedSegment::new(self.points[i], self.points[i + 1])
    }

    fn unit_dir(&self, i: usize) -> Point2 {
        let seg = self.segment(i);
        (seg.end - seg.start).scale(1.0 / seg.length())
    }

    /// Cartesian point at station `s` (clamped to the line) and lateral offset `d`.
    pub fn point_at(&self, s: f64, d: f64) -> Point2 {
        let s = s.clamp(0.0, self.length());
        // first segment whose end station is >= s, so a vertex belongs to the
        // segment that ends there
        let i = self
            .stations
            .iter()
            .skip(1)
            .position(|&st| st >= s)
            .unwrap_or(self.points.len() - 2);
        let u = self.unit_dir(i);
        let left = Point2::new(-u.y, u.x);
        self.points[i] + u.scale(s - self.stations[i]) + left.scale(d)
    }
}

/// Projects `p` onto the nearest point of the centerline. Ties between
/// segments resolve to the earlier segment.
pub fn frenet_project(cl: &Centerline, p: Point2) -> FrenetCoord {
    let mut best: Option<(f64, usize, f64)> = None;
    for i in 0..cl.points.len() - 1 {
        let seg = cl.segment(i);
        let t = seg.closest_param(p);
        let dist = dist_point_point(p, seg.point_at(t));
        if best.is_none_or(|(bd, _, _)| dist < bd) {
            best = Some((dist, i, t));
        }
    }
    let (_, i, t) = best.expect("centerline has a segment");
    let seg = cl.segment(i);
    let foot = seg.point_at(t);
    let s = cl.stations[i] + t * seg.length();
    let d = cl.unit_dir(i).cross(p - foot);
    FrenetCoord {
        s: s.clamp(0.0, cl.length()),
        d,
    }
}

/// Normalizes an angle into [-pi, pi).
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn point_distances() {
        assert_eq!(dist_point_point(p(0.0, 0.0), p(3.0, 4.0)), 5.0);
        assert_eq!(dist_point_point(p(1.0, 1.0), p(1.0, 1.0)), 0.0);
        assert_eq!(dist_point_point(p(-2.0, 0.0), p(2.0, 3.0)), 5.0);
    }

    #[test]
    fn segment_distances() {
        let seg = DirectedSegment::new(p(0.0, 0.0), p(2.0, 0.0));
        assert_eq!(dist_point_segment(p(1.0, 1.0), &seg), 1.0);
        assert_eq!(dist_point_segment(p(3.0, 0.0), &seg), 1.0);
        let dot = DirectedSegment::new(p(2.0, 2.0), p(2.0, 2.0));
        let d = dist_point_segment(p(5.0, 5.0), &dot);
        assert_eq!(d, dist_point_point(p(5.0, 5.0), p(2.0, 2.0)));
        assert!((d - 4.2426).abs() < 1e-4);
    }

    #[test]
    fn segment_segment_distance() {
        let a = DirectedSegment::new(p(0.0, 0.0), p(4.0, 0.0));
        let crossing = DirectedSegment::new(p(2.0, -1.0), p(2.0, 1.0));
        assert_eq!(dist_segment_segment(&a, &crossing), 0.0);
        let above = DirectedSegment::new(p(1.0, 3.0), p(3.0, 3.0));
        assert_eq!(dist_segment_segment(&a, &above), 3.0);
        let beyond = DirectedSegment::new(p(7.0, 4.0), p(9.0, 4.0));
        assert_eq!(dist_segment_segment(&a, &beyond), 5.0);
    }

    #[test]
    fn geodetic_examples() {
        let o = (39.9, 116.4);
        assert_eq!(geodetic_to_local(o.0, o.1, o).unwrap(), p(0.0, 0.0));
        let n = geodetic_to_local(o.0 + 1e-5, o.1, o).unwrap();
        assert!((n.y - 1.11319).abs() < 1e-5, "{n:?}");
        assert_eq!(n.x, 0.0);
        let e = geodetic_to_local(0.0, 10.0 + 1e-5, (0.0, 10.0)).unwrap();
        assert!((e.x - 1.11319).abs() < 1e-5, "{e:?}");
        assert!(geodetic_to_local(f64::NAN, 0.0, o).is_err());
        assert!(geodetic_to_local(0.0, f64::INFINITY, o).is_err());
    }

    #[test]
    fn frenet_examples() {
        let cl = Centerline::new(vec![p(0.0, 0.0), p(10.0, 0.0)]).unwrap();
        assert_eq!(frenet_project(&cl, p(5.0, 0.0)), FrenetCoord { s: 5.0, d: 0.0 });
        assert_eq!(frenet_project(&cl, p(5.0, 2.0)), FrenetCoord { s: 5.0, d: 2.0 });
        assert_eq!(frenet_project(&cl, p(12.0, 0.0)), FrenetCoord { s: 10.0, d: 0.0 });
    }

    #[test]
    fn frenet_tie_prefers_earlier_segment() {
        // point equidistant from both legs of a right angle
        let cl = Centerline::new(vec![p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0)]).unwrap();
        let f = frenet_project(&cl, p(12.0, -2.0));
        assert_eq!(f.s, 10.0);
    }

    #[test]
    fn centerline_rejects_degenerate() {
        assert_eq!(
            Centerline::new(vec![p(0.0, 0.0)]),
            Err(GeometryError::TooFewPoints(1))
        );
        assert_eq!(
            Centerline::new(vec![p(0.0, 0.0), p(0.0, 0.0)]),
            Err(GeometryError::RepeatedPoint(0, 1))
        );
    }

    #[test]
    fn point_at_on_bent_line() {
        let cl = Centerline::new(vec![p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0)]).unwrap();
        let q = cl.point_at(15.0, 1.0);
        assert!((q.x - 9.0).abs() < 1e-12 && (q.y - 5.0).abs() < 1e-12, "{q:?}");
        assert_eq!(cl.point_at(-3.0, 0.0), p(0.0, 0.0));
    }

    #[test]
    fn angle_normalization() {
        use std::f64::consts::PI;
        assert_eq!(normalize_angle(PI), -PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(normalize_angle(0.25), 0.25);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -1000.0..1000.0f64
    }

    proptest! {
        #[test]
        fn triangle_inequality_and_symmetry(ax in coord(), ay in coord(), bx in coord(), by in coord(), cx in coord(), cy in coord()) {
            let (a, b, c) = (p(ax, ay), p(bx, by), p(cx, cy));
            prop_assert_eq!(dist_point_point(a, b), dist_point_point(b, a));
            prop_assert!(dist_point_point(a, c) <= dist_point_point(a, b) + dist_point_point(b, c) + 1e-9);
        }

        #[test]
        fn segment_distance_bounded_by_endpoints(px in coord(), py in coord(), ax in coord(), ay in coord(), bx in coord(), by in coord()) {
            let q = p(px, py);
            let seg = DirectedSegment::new(p(ax, ay), p(bx, by));
            let d = dist_point_segment(q, &seg);
            prop_assert!(d >= 0.0);
            prop_assert!(d <= dist_point_point(q, seg.start).min(dist_point_point(q, seg.end)));
        }

        #[test]
        fn geodetic_round_trip(lat0 in -60.0..60.0f64, lon0 in -179.0..179.0f64, dlat in -0.09..0.09f64, dlon in -0.09..0.09f64) {
            let origin = (lat0, lon0);
            let local = geodetic_to_local(lat0 + dlat, lon0 + dlon, origin).unwrap();
            let (lat, lon) = local_to_geodetic(local, origin).unwrap();
            let back = geodetic_to_local(lat, lon, origin).unwrap();
            prop_assert!(dist_point_point(local, back) < 1e-6);
        }

        #[test]
        fn frenet_recovers_station_and_offset(s in 0.0..100.0f64, d in -20.0..20.0f64, heading in -3.1..3.1f64, ox in coord(), oy in coord()) {
            let o = p(ox, oy);
            let end = o + p(heading.cos(), heading.sin()).scale(100.0);
            let cl = Centerline::new(vec![o, end]).unwrap();
            let f = frenet_project(&cl, cl.point_at(s, d));
            prop_assert!((f.s - s).abs() < 1e-9, "s {} vs {}", f.s, s);
            prop_assert!((f.d - d).abs() < 1e-9, "d {} vs {}", f.d, d);
        }
    }
}
