use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BoundarySegment, Vec2, EPS_GEO};
use crate::error::{Error, Result};

/// Tangent mismatch below which a junction counts as smooth.
pub(crate) const SMOOTH_JOINT_TOL: f64 = 1e-7;

/// Ordered vertex list of a simple, positively oriented polygon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonSpec {
    vertices: Vec<Vec2>,
}

impl PolygonSpec {
    /// Validates the vertex list. Clockwise input is reoriented.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!("need at least 3 vertices, got {}", vertices.len())));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPolygon(format!("vertex {i} is not finite")));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i].distance(vertices[(i + 1) % n]) <= EPS_GEO {
                return Err(Error::InvalidPolygon(format!("vertices {i} and {} coincide", (i + 1) % n)));
            }
        }
        let area = shoelace(&vertices);
        if area.abs() <= EPS_GEO * EPS_GEO {
            return Err(Error::InvalidPolygon("zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(Error::InvalidPolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    /// Edge direction leaving vertex `i`.
    pub fn edge(&self, i: usize) -> Vec2 {
        let n = self.len();
        self.vertices[(i + 1) % n] - self.vertices[i]
    }

    /// Vertex `i` points into the domain (interior angle above 180 degrees).
    pub fn is_reflex(&self, i: usize) -> bool {
        let n = self.len();
        self.edge((i + n - 1) % n).cross(self.edge(i)) < 0.0
    }

    pub fn reflex_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_reflex(i)).collect()
    }

    /// Uniformly rescaled copy.
    pub fn scaled(&self, s: f64) -> Self {
        Self { vertices: self.vertices.iter().map(|&v| v * s).collect() }
    }

    /// Copy rescaled to unit area, with the applied scale factor.
    pub fn normalized(&self) -> (Self, f64) {
        let s = 1.0 / self.area().sqrt();
        (self.scaled(s), s)
    }
}

/// Signed shoelace area.
pub fn shoelace(v: &[Vec2]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

/// Closed (touching counts) segment intersection test.
pub(crate) fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    let tol = 1e-14 * (1.0 + (b - a).norm_sq() + (d - c).norm_sq());
    let on = |o: f64| o.abs() <= tol;
    if (o1 > tol && o2 < -tol || o1 < -tol && o2 > tol) && (o3 > tol && o4 < -tol || o3 < -tol && o4 > tol) {
        return true;
    }
    let within = |p: Vec2, q: Vec2, r: Vec2| {
        r.x >= p.x.min(q.x) - tol && r.x <= p.x.max(q.x) + tol && r.y >= p.y.min(q.y) - tol && r.y <= p.y.max(q.y) + tol
    };
    (on(o1) && within(a, b, c))
        || (on(o2) && within(a, b, d))
        || (on(o3) && within(c, d, a))
        || (on(o4) && within(c, d, b))
}

/// Polyline through a segment: lines as-is, arcs in steps of at most 1/128 turn.
fn outline(s: &BoundarySegment) -> Vec<Vec2> {
    match *s {
        BoundarySegment::Line { a, b } => vec![a, b],
        BoundarySegment::Arc { sweep, .. } => {
            let n = (sweep.abs() / (std::f64::consts::TAU / 128.0)).ceil().max(1.0) as usize;
            (0..=n).map(|k| s.point_at(k as f64 / n as f64)).collect()
        }
    }
}

/// Reflection symmetries of a domain about the coordinate axes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symmetry {
    /// Invariant under `x -> -x`.
    pub mirror_x: bool,
    /// Invariant under `y -> -y`.
    pub mirror_y: bool,
}

/// A billiard table: a closed, counterclockwise loop of lines and arcs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilliardDomain {
    segments: Vec<BoundarySegment>,
    area: f64,
    perimeter: f64,
    symmetry: Symmetry,
}

impl BilliardDomain {
    pub fn new(segments: Vec<BoundarySegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidDomain("empty boundary".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            match *s {
                BoundarySegment::Line { a, b } => {
                    if !a.is_finite() || !b.is_finite() || a.distance(b) <= EPS_GEO {
                        return Err(Error::InvalidDomain(format!("segment {i}: degenerate line")));
                    }
                }
                BoundarySegment::Arc { center, radius, start, sweep } => {
                    if !(radius > 0.0) || !center.is_finite() || !start.is_finite() {
                        return Err(Error::InvalidDomain(format!("segment {i}: bad arc radius")));
                    }
                    if sweep == 0.0 || !sweep.is_finite() {
                        return Err(Error::InvalidDomain(format!("segment {i}: zero sweep")));
                    }
                }
            }
        }
        let n = segments.len();
        for i in 0..n {
            let gap = segments[i].end().distance(segments[(i + 1) % n].start());
            if gap > EPS_GEO {
                return Err(Error::InvalidDomain(format!(
                    "loop not closed between segments {i} and {}: gap {gap:e}",
                    (i + 1) % n
                )));
            }
        }
        let area: f64 = segments.iter().map(BoundarySegment::green_area).sum();
        if !(area > 0.0) {
            return Err(Error::InvalidDomain(format!("non-positive area {area} (boundary must be counterclockwise)")));
        }
        let perimeter = segments.iter().map(BoundarySegment::length).sum();
        let mut domain = Self { segments, area, perimeter, symmetry: Symmetry::default() };
        domain.check_simple()?;
        domain.symmetry = domain.detect_symmetry();
        Ok(domain)
    }

    /// Domain bounded by the polygon's edges.
    pub fn from_polygon(spec: &PolygonSpec) -> Self {
        let v = spec.vertices();
        let n = v.len();
        let segments = (0..n).map(|i| BoundarySegment::line(v[i], v[(i + 1) % n])).collect();
        // A valid PolygonSpec is always a valid domain.
        Self::new(segments).expect("validated polygon")
    }

    fn check_simple(&self) -> Result<()> {
        let pieces: Vec<Vec<Vec2>> = self.segments.iter().map(outline).collect();
        let n = pieces.len();
        for i in 0..n {
            for j in i..n {
                let adjacent = j == (i + 1) % n || i == (j + 1) % n;
                let pi = &pieces[i];
                let pj = &pieces[j];
                for a in 0..pi.len() - 1 {
                    let b_start = if i == j { a + 2 } else { 0 };
                    for b in b_start..pj.len().saturating_sub(1) {
                        // Skip the shared endpoint of consecutive pieces.
                        if adjacent {
                            let shared_ij = j == (i + 1) % n && a == pi.len() - 2 && b == 0;
                            let shared_ji = i == (j + 1) % n && b == pj.len() - 2 && a == 0;
                            if shared_ij || shared_ji {
                                continue;
                            }
                        }
                        if i == j && a == 0 && b == pj.len() - 2 && n == 1 {
                            continue;
                        }
                        if segments_intersect(pi[a], pi[a + 1], pj[b], pj[b + 1]) {
                            return Err(Error::InvalidDomain(format!(
                                "boundary self-intersects between segments {i} and {j}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn segments(&self) -> &[BoundarySegment] {
        &self.segments
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Area from fresh quadrature of the boundary.
    pub fn recompute_area(&self) -> f64 {
        self.segments.iter().map(BoundarySegment::green_area).sum()
    }

    pub fn recompute_perimeter(&self) -> f64 {
        self.segments.iter().map(BoundarySegment::length).sum()
    }

    /// Axis-aligned bounding box `(min, max)` from dense boundary samples.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &self.segments {
            for p in s.sample(self.perimeter / 2000.0) {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.distance(hi)
    }

    /// Unsigned distance from `p` to the nearest boundary point.
    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        self.segments.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Strict interior test by ray crossing parity.
    pub fn is_interior(&self, p: Vec2) -> bool {
        let crossings: usize = self.segments.iter().map(|s| s.ray_crossings(p)).sum();
        crossings % 2 == 1
    }

    /// Distance to the boundary, positive inside and negative outside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let d = self.distance_to_boundary(p);
        if self.is_interior(p) {
            d
        } else {
            -d
        }
    }

    /// Membership with the boundary band of width `EPS_GEO` counted as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        self.is_interior(p) || self.distance_to_boundary(p) <= EPS_GEO
    }

    /// Junction `i` joins the end of segment `i - 1` to the start of segment
    /// `i`; it is a corner unless the two tangents agree.
    pub fn is_corner(&self, i: usize) -> bool {
        let n = self.segments.len();
        let prev = self.segments[(i + n - 1) % n].tangent_at(1.0);
        let next = self.segments[i].tangent_at(0.0);
        prev.cross(next).abs() > SMOOTH_JOINT_TOL || prev.dot(next) < 0.0
    }

    /// Corner points of the boundary.
    pub fn corners(&self) -> Vec<Vec2> {
        (0..self.segments.len()).filter(|&i| self.is_corner(i)).map(|i| self.segments[i].start()).collect()
    }

    /// Uniformly rescaled copy.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            segments: self.segments.iter().map(|seg| seg.scaled(s)).collect(),
            area: self.area * s * s,
            perimeter: self.perimeter * s,
            symmetry: self.symmetry,
        }
    }

    /// Rescale to unit area; returns the applied length scale.
    pub fn normalize_to_unit_area(&self) -> (Self, f64) {
        let s = 1.0 / self.area.sqrt();
        let mut d = self.scaled(s);
        d.area = d.recompute_area();
        (d, s)
    }

    fn detect_symmetry(&self) -> Symmetry {
        let tol = 10.0 * EPS_GEO * (1.0 + self.perimeter);
        let check = |fx: bool, fy: bool| {
            self.segments.iter().all(|s| {
                (0..=16).all(|k| {
                    let p = s.point_at(k as f64 / 16.0);
                    let q = Vec2::new(if fx { -p.x } else { p.x }, if fy { -p.y } else { p.y });
                    self.distance_to_boundary(q) <= tol
                })
            })
        };
        Symmetry { mirror_x: check(true, false), mirror_y: check(false, true) }
    }

    /// Plain-text form: one `L x1 y1 x2 y2` or `A cx cy r t1 t2 flag` record per
    /// segment. For arcs `t2 - t1` is the signed sweep and `flag` is 1 when the
    /// arc bulges into the domain.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            match *s {
                BoundarySegment::Line { a, b } => {
                    let _ = writeln!(out, "L {:.17e} {:.17e} {:.17e} {:.17e}", a.x, a.y, b.x, b.y);
                }
                BoundarySegment::Arc { center, radius, start, sweep } => {
                    let _ = writeln!(
                        out,
                        "A {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {}",
                        center.x,
                        center.y,
                        radius,
                        start,
                        start + sweep,
                        u8::from(sweep < 0.0)
                    );
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().unwrap_or_default();
            let nums: Vec<f64> = it
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidDomain(format!("line {}: {e}", lineno + 1)))?;
            let seg = match (tag, nums.as_slice()) {
                ("L", [x1, y1, x2, y2]) => BoundarySegment::line(Vec2::new(*x1, *y1), Vec2::new(*x2, *y2)),
                ("A", [cx, cy, r, t1, t2, flag]) => {
                    let sweep = t2 - t1;
                    if (sweep < 0.0) != (*flag != 0.0) {
                        return Err(Error::InvalidDomain(format!(
                            "line {}: arc flag disagrees with sweep direction",
                            lineno + 1
                        )));
                    }
                    BoundarySegment::arc(Vec2::new(*cx, *cy), *r, *t1, sweep)
                }
                _ => return Err(Error::InvalidDomain(format!("line {}: unrecognized record `{line}`", lineno + 1))),
            };
            segments.push(seg);
        }
        Self::new(segments)
    }

    /// A stable content hash of the boundary description.
    pub fn content_hash(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.to_text().as_bytes());
        h.finalize().into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn disk(r: f64) -> BilliardDomain {
        let segs = (0..4).map(|k| BoundarySegment::arc(Vec2::ZERO, r, k as f64 * PI / 2.0, PI / 2.0)).collect();
        BilliardDomain::new(segs).unwrap()
    }

    #[test]
    fn unit_square_area_perimeter() {
        let d = BilliardDomain::from_polygon(&presets::unit_square());
        assert_relative_eq!(d.area(), 1.0);
        assert_relative_eq!(d.perimeter(), 4.0);
    }

    #[test]
    fn disk_from_four_arcs() {
        let d = disk(1.0);
        assert!((d.area() - PI).abs() < 1e-12);
        assert!((d.perimeter() - 2.0 * PI).abs() < 1e-12);
        assert!(d.corners().is_empty());
        assert!(d.symmetry().mirror_x && d.symmetry().mirror_y);
    }

    #[test]
    fn repeated_vertex_rejected() {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        assert!(matches!(PolygonSpec::new(v), Err(Error::InvalidPolygon(_))));
    }

    #[test]
    fn bowtie_rejected() {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        assert!(PolygonSpec::new(v).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0)];
        let p = PolygonSpec::new(v).unwrap();
        assert!(p.area() > 0.0);
    }

    #[test]
    fn square_membership() {
        let d = BilliardDomain::from_polygon(&presets::unit_square());
        assert!(d.contains(Vec2::new(0.5, 0.5)));
        assert_relative_eq!(d.distance_to_boundary(Vec2::new(0.5, 0.5)), 0.5);
        assert!(!d.contains(Vec2::new(1.5, 0.5)));
        // Boundary band.
        assert!(d.contains(Vec2::new(1.0 + 0.5 * EPS_GEO, 0.5)));
        assert!(!d.contains(Vec2::new(1.0 + 2.0 * EPS_GEO, 0.5)));
        assert!(d.contains(Vec2::new(1.0, 0.5)));
    }

    #[test]
    fn disk_membership_uses_arcs() {
        let d = disk(1.0);
        assert!(d.contains(Vec2::new(0.7, 0.7)));
        assert!(!d.contains(Vec2::new(0.72, 0.72)));
        assert_relative_eq!(d.signed_distance(Vec2::new(0.0, 0.25)), 0.75, epsilon = 1e-14);
    }

    #[test]
    fn normalization() {
        let sq = BilliardDomain::from_polygon(&presets::square(2.0));
        let (n, s) = sq.normalize_to_unit_area();
        assert_relative_eq!(s, 0.5);
        assert!((n.area() - 1.0).abs() < 1e-12);
        assert_relative_eq!(n.perimeter(), 4.0, epsilon = 1e-12);

        let unit = BilliardDomain::from_polygon(&presets::unit_square());
        let (u, s) = unit.normalize_to_unit_area();
        assert_eq!(s, 1.0);
        assert_eq!(u.segments(), unit.segments());

        let (dn, s) = disk(1.0).normalize_to_unit_area();
        assert_relative_eq!(s, 1.0 / PI.sqrt(), epsilon = 1e-14);
        assert!((dn.area() - 1.0).abs() < 1e-12);
        match dn.segments()[0] {
            BoundarySegment::Arc { radius, .. } => {
                assert_relative_eq!(radius, 1.0 / PI.sqrt(), epsilon = 1e-14)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let (spec, _) = presets::butterfly().normalized();
        let d = crate::geometry::round_reflex_corners(&spec, 0.0183).unwrap();
        let back = BilliardDomain::from_text(&d.to_text()).unwrap();
        assert_eq!(back.segments(), d.segments());
    }

    #[test]
    fn text_rejects_garbage() {
        assert!(BilliardDomain::from_text("Q 1 2 3").is_err());
        assert!(BilliardDomain::from_text("A 0 0 1 0 1 1").is_err());
    }

    #[test]
    fn open_loop_rejected() {
        let segs = vec![
            BoundarySegment::line(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)),
            BoundarySegment::line(Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)),
            BoundarySegment::line(Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0 + 1e-6)),
        ];
        assert!(BilliardDomain::new(segs).is_err());
    }
}
