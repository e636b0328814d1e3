use serde::{Deserialize, Serialize};

use super::{BilliardDomain, BoundarySegment, Vec2, EPS_GEO};
use crate::error::{Error, Result};

/// Which symmetry axis a cut edge of a quarter domain lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CutAxis {
    /// Along `y = 0`: the mirror line of `y -> -y`.
    X,
    /// Along `x = 0`: the mirror line of `x -> -x`.
    Y,
}

/// The `x >= 0, y >= 0` quarter of a doubly symmetric domain.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadrantDomain {
    pub domain: BilliardDomain,
    /// Indices into `domain.segments()` of the two cut edges.
    pub cuts: Vec<(usize, CutAxis)>,
}

impl QuadrantDomain {
    pub fn cut_axis(&self, segment: usize) -> Option<CutAxis> {
        self.cuts.iter().find(|(i, _)| *i == segment).map(|&(_, a)| a)
    }
}

struct AxisHit {
    segment: usize,
    param: f64,
    point: Vec2,
}

fn axis_hits(domain: &BilliardDomain, dir: Vec2) -> Vec<AxisHit> {
    let mut hits: Vec<AxisHit> = Vec::new();
    for (i, s) in domain.segments().iter().enumerate() {
        // Lines may be hit at a shared endpoint; arcs may be hit twice.
        let mut t_min = 0.0;
        while let Some(h) = s.ray_hit(Vec2::ZERO, dir, t_min) {
            let param = s.parameter_of(h.point);
            hits.push(AxisHit { segment: i, param, point: h.point });
            t_min = h.t + EPS_GEO;
        }
    }
    hits.sort_by(|a, b| a.point.norm().total_cmp(&b.point.norm()));
    hits
}

/// Cut a domain symmetric under both `x -> -x` and `y -> -y` down to its
/// first quadrant. The two new straight edges along the axes are labeled so
/// that a solver can put Dirichlet or Neumann conditions on each.
pub fn symmetry_quadrant(domain: &BilliardDomain) -> Result<QuadrantDomain> {
    let sym = domain.symmetry();
    if !sym.mirror_x {
        return Err(Error::Asymmetric("x -> -x"));
    }
    if !sym.mirror_y {
        return Err(Error::Asymmetric("y -> -y"));
    }
    if !domain.is_interior(Vec2::ZERO) {
        return Err(Error::InvalidDomain("symmetry center lies outside the domain".into()));
    }
    let n = domain.segments().len();
    let unique = |hits: &[AxisHit]| {
        let mut pts: Vec<Vec2> = Vec::new();
        for h in hits {
            if pts.iter().all(|p| p.distance(h.point) > 1e3 * EPS_GEO) {
                pts.push(h.point);
            }
        }
        pts.len()
    };
    let hx = axis_hits(domain, Vec2::new(1.0, 0.0));
    let hy = axis_hits(domain, Vec2::new(0.0, 1.0));
    if unique(&hx) != 1 || unique(&hy) != 1 {
        return Err(Error::InvalidDomain("each positive half-axis must cross the boundary exactly once".into()));
    }
    // Where the boundary enters the quadrant (crossing +x) and leaves it (crossing +y).
    let (sx, px) = match hx.iter().find(|h| h.param < 1.0 - 1e-12) {
        Some(h) => (h.segment, h.param),
        None => ((hx[0].segment + 1) % n, 0.0),
    };
    let (sy, py) = match hy.iter().find(|h| h.param > 1e-12) {
        Some(h) => (h.segment, h.param),
        None => ((hy[0].segment + n - 1) % n, 1.0),
    };

    let segs = domain.segments();
    let mut pieces: Vec<BoundarySegment> = Vec::new();
    let mut push = |s: BoundarySegment| {
        if s.length() > 10.0 * EPS_GEO {
            pieces.push(s);
        }
    };
    if sx == sy && px <= py {
        let (_, tail) = segs[sx].split_at(px);
        let rel = if px < 1.0 { (py - px) / (1.0 - px) } else { 1.0 };
        push(tail.split_at(rel).0);
    } else {
        push(segs[sx].split_at(px).1);
        let mut k = (sx + 1) % n;
        while k != sy {
            push(segs[k]);
            k = (k + 1) % n;
        }
        push(segs[sy].split_at(py).0);
    }
    let first = pieces.first().map(|s| s.start()).unwrap_or(Vec2::ZERO);
    let last = pieces.last().map(|s| s.end()).unwrap_or(Vec2::ZERO);
    // Snap the axis crossings onto the axes exactly.
    let x_point = Vec2::new(first.x, 0.0);
    let y_point = Vec2::new(0.0, last.y);
    let mut segments = Vec::with_capacity(pieces.len() + 2);
    segments.push(BoundarySegment::line(Vec2::ZERO, x_point));
    segments.extend(pieces);
    segments.push(BoundarySegment::line(y_point, Vec2::ZERO));
    let cuts = vec![(0, CutAxis::X), (segments.len() - 1, CutAxis::Y)];
    let quadrant = BilliardDomain::new(segments)?;
    Ok(QuadrantDomain { domain: quadrant, cuts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use approx::assert_relative_eq;

    #[test]
    fn centered_square_quadrant() {
        let d = BilliardDomain::from_polygon(&presets::centered_square(1.0));
        let q = symmetry_quadrant(&d).unwrap();
        assert_relative_eq!(q.domain.area(), 0.25, epsilon = 1e-12);
        assert_eq!(q.cuts.len(), 2);
        assert_eq!(q.cut_axis(0), Some(CutAxis::X));
        assert_relative_eq!(q.domain.perimeter(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn butterfly_quadrant_has_quarter_area() {
        let (spec, _) = presets::butterfly().normalized();
        let d = BilliardDomain::from_polygon(&spec);
        let q = symmetry_quadrant(&d).unwrap();
        assert!((q.domain.area() - 0.25).abs() < 1e-10);
        let r = crate::geometry::round_reflex_corners(&spec, presets::BUTTERFLY_ROUNDING_RADIUS).unwrap();
        let qr = symmetry_quadrant(&r).unwrap();
        assert!((qr.domain.area() - r.area() / 4.0).abs() < 1e-10);
        let e = crate::geometry::erode(&spec, 0.04).unwrap();
        let qe = symmetry_quadrant(&e).unwrap();
        assert!((qe.domain.area() - e.area() / 4.0).abs() < 1e-10);
    }

    #[test]
    fn asymmetric_triangle_rejected() {
        let d = BilliardDomain::from_polygon(&presets::asymmetric_triangle());
        assert!(matches!(symmetry_quadrant(&d), Err(Error::Asymmetric(_))));
    }
}
