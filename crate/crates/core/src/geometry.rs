//! Planar primitives shared by the whole pipeline.
//!
//! Coordinates are image pixels with the origin at the top-left pixel centre,
//! `x` growing to the right and `y` growing downwards. Integer coordinates are
//! pixel centres.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Snap tolerance used when deciding whether two endpoints are the same
/// junction for exact (synthetic) data.
pub const SNAP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("segment endpoints coincide at ({x}, {y})")]
    ZeroLength { x: f64, y: f64 },
    #[error("non-finite coordinate in segment")]
    NonFinite,
    #[error("neither segment has an endpoint at ({x}, {y})")]
    MissingSharedEndpoint { x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist2(self, other: Point) -> f64 {
        let d = self.sub(other);
        d.dot(d)
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn approx_eq(self, other: Point, tol: f64) -> bool {
        self.dist2(other) <= tol * tol
    }
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// A line segment with distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    a: Point,
    b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Result<Self, GeometryError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if a == b {
            return Err(GeometryError::ZeroLength { x: a.x, y: a.y });
        }
        Ok(Self { a, b })
    }

    pub fn from_coords(ax: f64, ay: f64, bx: f64, by: f64) -> Result<Self, GeometryError> {
        Self::new(Point::new(ax, ay), Point::new(bx, by))
    }

    pub fn a(&self) -> Point {
        self.a
    }

    pub fn b(&self) -> Point {
        self.b
    }

    pub fn reversed(&self) -> Segment {
        Segment { a: self.b, b: self.a }
    }

    /// The same segment with endpoints in lexicographic `(x, y)` order.
    pub fn canonical(&self) -> Segment {
        if (self.a.x, self.a.y) <= (self.b.x, self.b.y) {
            *self
        } else {
            self.reversed()
        }
    }

    pub fn direction(&self) -> Point {
        self.b.sub(self.a)
    }

    pub fn length(&self) -> f64 {
        self.direction().norm()
    }

    pub fn midpoint(&self) -> Point {
        self.a.add(self.b).scale(0.5)
    }

    pub fn point_at(&self, t: f64) -> Point {
        self.a.add(self.direction().scale(t))
    }

    /// Euclidean distance from `p` to the closest point of the segment.
    pub fn distance_to_point(&self, p: Point) -> f64 {
        let d = self.direction();
        let t = (p.sub(self.a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
        p.dist(self.point_at(t))
    }

    /// The endpoint other than `p`, if `p` is one of the endpoints.
    pub fn other_endpoint(&self, p: Point, tol: f64) -> Option<Point> {
        if self.a.approx_eq(p, tol) {
            Some(self.b)
        } else if self.b.approx_eq(p, tol) {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SegmentClass {
    Null = 0,
    Wall = 1,
    Door = 2,
    Window = 3,
}

impl SegmentClass {
    pub const COUNT: usize = 4;
    pub const ALL: [SegmentClass; 4] = [
        SegmentClass::Null,
        SegmentClass::Wall,
        SegmentClass::Door,
        SegmentClass::Window,
    ];
    pub const MEANINGFUL: [SegmentClass; 3] =
        [SegmentClass::Wall, SegmentClass::Door, SegmentClass::Window];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_meaningful(self) -> bool {
        self != SegmentClass::Null
    }

    pub fn label(self) -> &'static str {
        match self {
            SegmentClass::Null => "null",
            SegmentClass::Wall => "wall",
            SegmentClass::Door => "door",
            SegmentClass::Window => "window",
        }
    }
}

impl fmt::Display for SegmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SegmentClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "null" => Ok(SegmentClass::Null),
            "wall" => Ok(SegmentClass::Wall),
            "door" => Ok(SegmentClass::Door),
            "window" => Ok(SegmentClass::Window),
            other => Err(other.to_string()),
        }
    }
}

/// Smallest angle in degrees between the segment direction and the four axis
/// unit vectors. Always in `[0, 45]`.
pub fn axis_angle(seg: &Segment) -> f64 {
    let d = seg.direction();
    let (ax, ay) = (d.x.abs(), d.y.abs());
    ax.min(ay).atan2(ax.max(ay)).to_degrees()
}

/// Angle in degrees between the two rays leaving `shared` along `s1` and `s2`.
pub fn junction_angle(
    s1: &Segment,
    s2: &Segment,
    shared: Point,
    tol: f64,
) -> Result<f64, GeometryError> {
    let missing = || GeometryError::MissingSharedEndpoint {
        x: shared.x,
        y: shared.y,
    };
    let u = s1.other_endpoint(shared, tol).ok_or_else(missing)?.sub(shared);
    let v = s2.other_endpoint(shared, tol).ok_or_else(missing)?.sub(shared);
    Ok(u.cross(v).abs().atan2(u.dot(v)).to_degrees())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

/// Whether `p` lies strictly inside `seg`, away from both endpoints.
fn in_open_interior(seg: &Segment, p: Point, tol: f64) -> bool {
    let d = seg.direction();
    let len = d.norm();
    if (orient(seg.a, seg.b, p) / len).abs() > tol {
        return false;
    }
    let t = p.sub(seg.a).dot(d) / len;
    t > tol && t < len - tol
}

/// True when the two segments cross, overlap, or one touches the interior of
/// the other. Contact only at shared endpoints does not count.
pub fn proper_intersect(s1: &Segment, s2: &Segment) -> bool {
    let tol = SNAP_TOLERANCE;
    let (a, b, c, d) = (s1.a, s1.b, s2.a, s2.b);
    let o1 = orient(a, b, c) / s1.length();
    let o2 = orient(a, b, d) / s1.length();
    let o3 = orient(c, d, a) / s2.length();
    let o4 = orient(c, d, b) / s2.length();

    if o1.abs() <= tol && o2.abs() <= tol {
        // Collinear: overlap of the projections onto s1's direction.
        let dir = s1.direction().scale(1.0 / s1.length());
        let (t0, t1) = (0.0, s1.length());
        let (mut u0, mut u1) = (c.sub(a).dot(dir), d.sub(a).dot(dir));
        if u0 > u1 {
            std::mem::swap(&mut u0, &mut u1);
        }
        return u1.min(t1) - u0.max(t0) > tol;
    }

    if ((o1 > tol && o2 < -tol) || (o1 < -tol && o2 > tol))
        && ((o3 > tol && o4 < -tol) || (o3 < -tol && o4 > tol))
    {
        return true;
    }

    in_open_interior(s1, c, tol)
        || in_open_interior(s1, d, tol)
        || in_open_interior(s2, a, tol)
        || in_open_interior(s2, b, tol)
}

/// Intersection point of two non-parallel segments, if they meet (including at
/// endpoints).
pub fn intersection_point(s1: &Segment, s2: &Segment) -> Option<Point> {
    let r = s1.direction();
    let s = s2.direction();
    let denom = r.cross(s);
    if denom.abs() < 1e-12 {
        return None;
    }
    let qp = s2.a.sub(s1.a);
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    let eps = 1e-9;
    if (-eps..=1.0 + eps).contains(&t) && (-eps..=1.0 + eps).contains(&u) {
        Some(s1.point_at(t.clamp(0.0, 1.0)))
    } else {
        None
    }
}

/// Convex hull in counter-clockwise order (positive signed area in the
/// coordinate frame as given), without collinear boundary points.
///
/// Fewer than three distinct non-collinear points degrade gracefully: a
/// collinear set yields its two extreme points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }

    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Structural matching cost between two segments: the smaller of the two
/// endpoint pairings' sums of squared endpoint distances.
pub fn structural_distance(s1: &Segment, s2: &Segment) -> f64 {
    let direct = s1.a.dist2(s2.a) + s1.b.dist2(s2.b);
    let swapped = s1.a.dist2(s2.b) + s1.b.dist2(s2.a);
    direct.min(swapped)
}

/// Largest endpoint distance under the better of the two endpoint pairings.
pub fn endpoint_max_distance(s1: &Segment, s2: &Segment) -> f64 {
    let direct = s1.a.dist(s2.a).max(s1.b.dist(s2.b));
    let swapped = s1.a.dist(s2.b).max(s1.b.dist(s2.a));
    direct.min(swapped)
}

/// Signed area of a closed polygon (shoelace). Positive for counter-clockwise
/// order in the given frame.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| poly[i].cross(poly[(i + 1) % n]))
        .sum::<f64>()
}

/// Even-odd point-in-polygon test. Points exactly on the boundary may land
/// on either side.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (pi, pj) = (poly[i], poly[j]);
        if (pi.y > p.y) != (pj.y > p.y) {
            let x = pj.x + (p.y - pj.y) / (pi.y - pj.y) * (pi.x - pj.x);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::from_coords(ax, ay, bx, by).unwrap()
    }

    /// Angle between the segment and each of the four axis unit vectors, via
    /// arccos of the normalised dot product.
    fn axis_angle_oracle(s: &Segment) -> f64 {
        let d = s.direction();
        let l = d.norm();
        [(0.0, 1.0), (0.0, -1.0), (1.0, 0.0), (-1.0, 0.0)]
            .iter()
            .map(|&(ux, uy)| ((d.x * ux + d.y * uy) / l).clamp(-1.0, 1.0).acos().to_degrees())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn zero_length_rejected() {
        assert!(matches!(
            Segment::from_coords(1.0, 1.0, 1.0, 1.0),
            Err(GeometryError::ZeroLength { .. })
        ));
        assert!(Segment::from_coords(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn axis_angle_examples() {
        assert_eq!(axis_angle(&seg(0.0, 0.0, 10.0, 0.0)), 0.0);
        assert!((axis_angle(&seg(0.0, 0.0, 10.0, 10.0)) - 45.0).abs() < 1e-12);
        let expected = (10.0f64 / 100.0).atan().to_degrees();
        assert!((expected - 5.7106).abs() < 1e-4);
        assert!((axis_angle(&seg(0.0, 0.0, 100.0, 10.0)) - expected).abs() < 1e-12);
    }

    #[test]
    fn junction_angle_examples() {
        let o = Point::new(0.0, 0.0);
        let h = seg(0.0, 0.0, 10.0, 0.0);
        let v = seg(0.0, 0.0, 0.0, 10.0);
        assert!((junction_angle(&h, &v, o, SNAP_TOLERANCE).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(junction_angle(&h, &h, o, SNAP_TOLERANCE).unwrap(), 0.0);
        let tilted = seg(0.0, 0.0, 10.0, 1.0);
        let expected = (1.0f64 / 10.0).atan().to_degrees();
        let got = junction_angle(&h, &tilted, o, SNAP_TOLERANCE).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 5.7106).abs() < 1e-4);
        // shared point given at the far end of one segment
        let back = seg(10.0, 0.0, 0.0, 0.0);
        assert_eq!(junction_angle(&back, &h, o, SNAP_TOLERANCE).unwrap(), 0.0);
    }

    #[test]
    fn junction_angle_missing_endpoint() {
        let h = seg(0.0, 0.0, 10.0, 0.0);
        let v = seg(5.0, 5.0, 5.0, 10.0);
        let err = junction_angle(&h, &v, Point::new(0.0, 0.0), SNAP_TOLERANCE).unwrap_err();
        assert!(matches!(err, GeometryError::MissingSharedEndpoint { .. }));
    }

    #[test]
    fn proper_intersect_examples() {
        assert!(proper_intersect(&seg(0.0, 0.0, 10.0, 10.0), &seg(0.0, 10.0, 10.0, 0.0)));
        assert!(!proper_intersect(&seg(0.0, 0.0, 10.0, 0.0), &seg(0.0, 1.0, 10.0, 1.0)));
        assert!(!proper_intersect(&seg(0.0, 0.0, 10.0, 0.0), &seg(10.0, 0.0, 10.0, 10.0)));
        // T contact: endpoint in the other's interior
        assert!(proper_intersect(&seg(0.0, 0.0, 10.0, 0.0), &seg(5.0, 0.0, 5.0, 10.0)));
        // collinear overlap and collinear continuation
        assert!(proper_intersect(&seg(0.0, 0.0, 10.0, 0.0), &seg(5.0, 0.0, 15.0, 0.0)));
        assert!(!proper_intersect(&seg(0.0, 0.0, 10.0, 0.0), &seg(10.0, 0.0, 15.0, 0.0)));
        assert!(proper_intersect(&seg(0.0, 0.0, 10.0, 0.0), &seg(0.0, 0.0, 10.0, 0.0)));
    }

    #[test]
    fn convex_hull_examples() {
        let sq = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        let hull = convex_hull(&sq);
        assert_eq!(hull.len(), 4);
        assert!(signed_area(&hull) > 0.0);
        for p in &sq {
            assert!(hull.contains(p));
        }
        let mut with_centre = sq.to_vec();
        with_centre.push(Point::new(0.5, 0.5));
        with_centre.push(Point::new(0.5, 0.0)); // collinear on an edge
        let hull2 = convex_hull(&with_centre);
        assert_eq!(hull2.len(), 4);
        assert!(!hull2.contains(&Point::new(0.5, 0.5)));

        let line = [Point::new(0.0, 0.0), Point::new(2.0, 2.0), Point::new(1.0, 1.0)];
        assert_eq!(convex_hull(&line), vec![Point::new(0.0, 0.0), Point::new(2.0, 2.0)]);
    }

    /// O(n^3) hull: a directed pair (p, q) is a hull edge when every other
    /// point is strictly left of p->q or on the closed segment pq.
    fn brute_force_hull_vertices(pts: &[Point]) -> Vec<Point> {
        let mut verts = Vec::new();
        for (i, &p) in pts.iter().enumerate() {
            for (j, &q) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let ok = pts.iter().enumerate().all(|(k, &r)| {
                    if k == i || k == j {
                        return true;
                    }
                    let o = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
                    o > 0.0
                        || (o == 0.0
                            && (r.x - p.x) * (r.x - q.x) + (r.y - p.y) * (r.y - q.y) < 0.0)
                });
                if ok {
                    verts.push(p);
                    verts.push(q);
                }
            }
        }
        verts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        verts.dedup();
        verts
    }

    #[test]
    fn convex_hull_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pts: Vec<Point> = (0..20)
                .map(|_| Point::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
                .collect();
            let mut hull = convex_hull(&pts);
            let n = hull.len();
            for i in 0..n {
                let o = orient(hull[i], hull[(i + 1) % n], hull[(i + 2) % n]);
                assert!(o > 0.0, "hull not strictly convex");
            }
            for p in &pts {
                for i in 0..n {
                    assert!(orient(hull[i], hull[(i + 1) % n], *p) >= -1e-9);
                }
            }
            hull.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
            assert_eq!(hull, brute_force_hull_vertices(&pts));
        }
    }

    #[test]
    fn structural_distance_examples() {
        let s = seg(0.0, 0.0, 10.0, 0.0);
        assert_eq!(structural_distance(&s, &s), 0.0);
        assert_eq!(structural_distance(&s, &s.reversed()), 0.0);
        let shifted = seg(1.0, 0.0, 11.0, 0.0);
        // enumerate both pairings by hand
        let pairing_a = 1.0f64.powi(2) + 1.0f64.powi(2);
        let pairing_b = 11.0f64.powi(2) + 9.0f64.powi(2);
        assert_eq!(structural_distance(&s, &shifted), pairing_a.min(pairing_b));
        assert_eq!(structural_distance(&s, &shifted), 2.0);
    }

    /// Dense rasterisation oracle for `proper_intersect`: both segments are
    /// drawn as 1-px wide strokes on a 0.25 px grid, disks of radius 1 px
    /// around every endpoint are masked out, and the remaining strokes are
    /// tested for a common cell.
    fn raster_overlap(s1: &Segment, s2: &Segment) -> bool {
        let cell = 0.25;
        let pts = [s1.a, s1.b, s2.a, s2.b];
        let min_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - 1.0;
        let max_x = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let min_y = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - 1.0;
        let max_y = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let nx = ((max_x - min_x) / cell).ceil() as usize;
        let ny = ((max_y - min_y) / cell).ceil() as usize;
        for iy in 0..ny {
            for ix in 0..nx {
                let p = Point::new(min_x + (ix as f64 + 0.5) * cell, min_y + (iy as f64 + 0.5) * cell);
                if pts.iter().any(|q| q.dist(p) <= 1.0) {
                    continue;
                }
                if s1.distance_to_point(p) <= 0.5 && s2.distance_to_point(p) <= 0.5 {
                    return true;
                }
            }
        }
        false
    }

    /// Pairs whose closest approach or crossing sits near a stroke boundary
    /// or an endpoint disk are ambiguous for the raster oracle.
    fn unambiguous(s1: &Segment, s2: &Segment) -> bool {
        let ends = [s1.a, s1.b, s2.a, s2.b];
        if let Some(x) = intersection_point(s1, s2) {
            return ends.iter().all(|e| e.dist(x) > 2.5);
        }
        let gap = [
            s1.distance_to_point(s2.a),
            s1.distance_to_point(s2.b),
            s2.distance_to_point(s1.a),
            s2.distance_to_point(s1.b),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        gap > 2.0
    }

    #[test]
    fn proper_intersect_matches_raster_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        let mut crossings = 0;
        for _ in 0..1000 {
            let mut r = || rng.gen_range(0.0..40.0);
            let s1 = seg(r(), r(), r(), r());
            let s2 = seg(r(), r(), r(), r());
            if !unambiguous(&s1, &s2) {
                continue;
            }
            checked += 1;
            let expected = raster_overlap(&s1, &s2);
            crossings += expected as usize;
            assert_eq!(proper_intersect(&s1, &s2), expected, "{s1:?} {s2:?}");
            assert_eq!(proper_intersect(&s2, &s1), expected);
        }
        assert!(checked > 700, "only {checked} unambiguous pairs");
        assert!(crossings > 50);
    }

    fn arb_segment() -> impl Strategy<Value = Segment> {
        (0.0..200.0f64, 0.0..200.0f64, 0.0..200.0f64, 0.0..200.0f64)
            .prop_filter("non-degenerate", |(a, b, c, d)| (a - c).abs() + (b - d).abs() > 1e-3)
            .prop_map(|(a, b, c, d)| seg(a, b, c, d))
    }

    proptest! {
        #[test]
        fn axis_angle_invariances(s in arb_segment(), dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
            let base = axis_angle(&s);
            prop_assert!((0.0..=45.0).contains(&base));
            prop_assert!((base - axis_angle_oracle(&s)).abs() < 1e-7);
            prop_assert!((axis_angle(&s.reversed()) - base).abs() < 1e-12);
            let moved = seg(s.a().x + dx, s.a().y + dy, s.b().x + dx, s.b().y + dy);
            prop_assert!((axis_angle(&moved) - base).abs() < 1e-9);
            let rot = seg(-s.a().y, s.a().x, -s.b().y, s.b().x);
            prop_assert!((axis_angle(&rot) - base).abs() < 1e-9);
        }

        #[test]
        fn junction_angle_symmetric(ax in 1.0..50.0f64, ay in -50.0..50.0f64, bx in -50.0..50.0f64, by in 1.0..50.0f64) {
            let o = Point::new(0.0, 0.0);
            let s1 = seg(0.0, 0.0, ax, ay);
            let s2 = seg(bx, by, 0.0, 0.0);
            let a = junction_angle(&s1, &s2, o, SNAP_TOLERANCE).unwrap();
            let b = junction_angle(&s2, &s1, o, SNAP_TOLERANCE).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=180.0).contains(&a));
        }

        #[test]
        fn structural_distance_symmetric(s1 in arb_segment(), s2 in arb_segment()) {
            prop_assert_eq!(structural_distance(&s1, &s2), structural_distance(&s2, &s1));
            prop_assert_eq!(structural_distance(&s1, &s1), 0.0);
        }

        #[test]
        fn proper_intersect_symmetric(s1 in arb_segment(), s2 in arb_segment()) {
            prop_assert_eq!(proper_intersect(&s1, &s2), proper_intersect(&s2, &s1));
        }
    }
}
