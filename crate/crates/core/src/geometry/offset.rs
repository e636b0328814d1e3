//! Inward offsets of polygons: disk erosion and reflex-corner filleting.

use super::{BilliardDomain, BoundarySegment, PolygonSpec, Vec2, EPS_GEO};
use crate::error::{Error, Result};

const COLLINEAR_TOL: f64 = 1e-12;

struct Frame {
    /// Unit edge directions; `dirs[i]` leaves vertex `i`.
    dirs: Vec<Vec2>,
    /// Inward unit normals.
    normals: Vec<Vec2>,
    lengths: Vec<f64>,
}

impl Frame {
    fn new(spec: &PolygonSpec) -> Self {
        let n = spec.len();
        let mut dirs = Vec::with_capacity(n);
        let mut lengths = Vec::with_capacity(n);
        for i in 0..n {
            let e = spec.edge(i);
            lengths.push(e.norm());
            dirs.push(e.normalized());
        }
        let normals = dirs.iter().map(|d| d.perp()).collect();
        Self { dirs, normals, lengths }
    }

    fn prev(&self, i: usize) -> usize {
        (i + self.dirs.len() - 1) % self.dirs.len()
    }

    /// Signed turning angle at vertex `i`; negative at reflex vertices.
    fn turn(&self, i: usize) -> f64 {
        let (a, b) = (self.dirs[self.prev(i)], self.dirs[i]);
        a.cross(b).atan2(a.dot(b))
    }
}

/// The set of centers of a disk of radius `r` that fits inside the polygon.
///
/// Every edge moves inward by `r`; convex corners stay sharp at the
/// intersection of the moved edges and reflex corners become clockwise arcs
/// of radius `r` centered on the original vertex.
pub fn erode(spec: &PolygonSpec, r: f64) -> Result<BilliardDomain> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("erosion radius must be >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(BilliardDomain::from_polygon(spec));
    }
    let v = spec.vertices();
    let n = v.len();
    let f = Frame::new(spec);

    let mut starts = vec![Vec2::ZERO; n];
    let mut ends = vec![Vec2::ZERO; n];
    let mut arcs: Vec<Option<BoundarySegment>> = vec![None; n];
    for i in 0..n {
        let p = f.prev(i);
        let (np, ni) = (f.normals[p], f.normals[i]);
        let cross = f.dirs[p].cross(f.dirs[i]);
        if cross < -COLLINEAR_TOL {
            ends[p] = v[i] + np * r;
            starts[i] = v[i] + ni * r;
            arcs[i] = Some(BoundarySegment::arc(v[i], r, np.angle(), f.turn(i)));
        } else {
            let denom = 1.0 + np.dot(ni);
            if denom < 1e-9 {
                return Err(Error::DegenerateOffset {
                    vertex: i,
                    reason: "corner too sharp for an inward offset".into(),
                });
            }
            let corner = v[i] + (np + ni) * (r / denom);
            ends[p] = corner;
            starts[i] = corner;
        }
    }

    let mut segments = Vec::with_capacity(2 * n);
    for i in 0..n {
        let along = (ends[i] - starts[i]).dot(f.dirs[i]);
        if along <= 0.0 {
            return Err(Error::ErosionTooLarge { radius: r, reason: format!("offset of edge {i} collapses") });
        }
        if along <= EPS_GEO * 10.0 {
            return Err(Error::DegenerateOffset {
                vertex: (i + 1) % n,
                reason: format!("offset edge {i} nearly vanishes"),
            });
        }
        if let Some(arc) = arcs[i] {
            segments.push(arc);
        }
        segments.push(BoundarySegment::line(starts[i], ends[i]));
    }
    BilliardDomain::new(segments).map_err(|e| Error::ErosionTooLarge { radius: r, reason: e.to_string() })
}

/// Replace each reflex corner by a tangent fillet of radius `radius`.
///
/// The fillet center sits outside the domain, so every fillet is a
/// dispersing arc. Its angular extent equals that of the erosion arc at the
/// same vertex. Convex corners are left untouched.
pub fn round_reflex_corners(spec: &PolygonSpec, radius: f64) -> Result<BilliardDomain> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("rounding radius must be > 0, got {radius}")));
    }
    let v = spec.vertices();
    let n = v.len();
    let f = Frame::new(spec);

    let mut trim = vec![0.0; n];
    let mut arcs: Vec<Option<BoundarySegment>> = vec![None; n];
    for i in 0..n {
        if !spec.is_reflex(i) {
            continue;
        }
        let p = f.prev(i);
        let beta = f.turn(i);
        let t = radius * (0.5 * beta.abs()).tan();
        let tangent_in = v[i] - f.dirs[p] * t;
        let center = tangent_in - f.normals[p] * radius;
        trim[i] = t;
        arcs[i] = Some(BoundarySegment::arc(center, radius, f.normals[p].angle(), beta));
    }

    let mut segments = Vec::with_capacity(2 * n);
    for i in 0..n {
        let j = (i + 1) % n;
        if trim[i] + trim[j] >= f.lengths[i] - EPS_GEO {
            let vertex = if trim[j] > trim[i] { j } else { i };
            return Err(Error::OverlappingRounding { radius, vertex });
        }
        if let Some(arc) = arcs[i] {
            segments.push(arc);
        }
        let a = v[i] + f.dirs[i] * trim[i];
        let b = v[j] - f.dirs[i] * trim[j];
        segments.push(BoundarySegment::line(a, b));
    }
    BilliardDomain::new(segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use approx::assert_relative_eq;

    #[test]
    fn erode_zero_is_identity() {
        let sq = presets::unit_square();
        let d = erode(&sq, 0.0).unwrap();
        assert_eq!(d, BilliardDomain::from_polygon(&sq));
    }

    #[test]
    fn erode_square() {
        let d = erode(&presets::unit_square(), 0.1).unwrap();
        assert_relative_eq!(d.area(), 0.64, epsilon = 1e-12);
        assert_relative_eq!(d.perimeter(), 3.2, epsilon = 1e-12);
        assert!(d.segments().iter().all(|s| !s.is_arc()));
        assert_relative_eq!(d.segments()[0].start().x, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn erode_l_hexagon_has_one_arc_at_reflex_vertex() {
        let spec = presets::l_hexagon();
        let reflex = spec.reflex_vertices();
        assert_eq!(reflex.len(), 1);
        let d = erode(&spec, 0.05).unwrap();
        let arcs: Vec<_> = d.segments().iter().filter(|s| s.is_arc()).collect();
        assert_eq!(arcs.len(), 1);
        match *arcs[0] {
            BoundarySegment::Arc { center, radius, sweep, .. } => {
                assert_eq!(center, spec.vertices()[reflex[0]]);
                assert_relative_eq!(radius, 0.05);
                assert_relative_eq!(sweep, -std::f64::consts::FRAC_PI_2, epsilon = 1e-14);
            }
            _ => unreachable!(),
        }
        assert!(arcs[0].is_dispersing());
    }

    #[test]
    fn erode_too_far_fails() {
        assert!(erode(&presets::unit_square(), 0.5).is_err());
        assert!(erode(&presets::unit_square(), 0.7).is_err());
        // Butterfly waist pinches long before its wings vanish.
        let (b, _) = presets::butterfly().normalized();
        assert!(matches!(erode(&b, 0.3), Err(Error::ErosionTooLarge { .. })));
        assert!(erode(&presets::unit_square(), -0.1).is_err());
    }

    #[test]
    fn rounding_convex_polygon_is_identity() {
        let sq = presets::unit_square();
        assert_eq!(round_reflex_corners(&sq, 0.1).unwrap(), BilliardDomain::from_polygon(&sq));
    }

    #[test]
    fn rounding_overlap_detected() {
        let spec = presets::l_hexagon();
        assert!(matches!(round_reflex_corners(&spec, 0.6), Err(Error::OverlappingRounding { .. })));
    }

    #[test]
    fn fillet_for_right_angle_notch() {
        let spec = presets::l_hexagon();
        let r = 0.05;
        let d = round_reflex_corners(&spec, r).unwrap();
        let v = spec.vertices()[spec.reflex_vertices()[0]];
        let arc = d.segments().iter().find(|s| s.is_arc()).unwrap();
        // Right-angle notch: the fillet stops (sqrt(2) - 1) r short of the vertex.
        let gap = d.distance_to_boundary(v);
        assert_relative_eq!(gap, (2f64.sqrt() - 1.0) * r, epsilon = 1e-12);
        assert_relative_eq!(arc.start().distance(v), r, epsilon = 1e-12);
        assert!(d.area() > spec.area());
    }
}
