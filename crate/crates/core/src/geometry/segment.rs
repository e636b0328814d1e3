use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::Vec2;

/// One piece of a billiard boundary, oriented along the direction of travel.
///
/// Arcs are parametrized by a start angle and a signed sweep: a positive
/// sweep is traversed counterclockwise about the center (the domain lies on
/// the center side, a focusing wall) and a negative sweep clockwise (the arc
/// bulges into the domain, a dispersing wall).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundarySegment {
    Line { a: Vec2, b: Vec2 },
    Arc { center: Vec2, radius: f64, start: f64, sweep: f64 },
}

/// Result of casting a ray against a segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub point: Vec2,
    /// Unit normal of the wall pointing out of the domain.
    pub normal: Vec2,
}

impl BoundarySegment {
    pub fn line(a: Vec2, b: Vec2) -> Self {
        BoundarySegment::Line { a, b }
    }

    pub fn arc(center: Vec2, radius: f64, start: f64, sweep: f64) -> Self {
        BoundarySegment::Arc { center, radius, start, sweep }
    }

    pub fn start(&self) -> Vec2 {
        match *self {
            BoundarySegment::Line { a, .. } => a,
            BoundarySegment::Arc { center, radius, start, .. } => center + Vec2::from_angle(start) * radius,
        }
    }

    pub fn end(&self) -> Vec2 {
        match *self {
            BoundarySegment::Line { b, .. } => b,
            BoundarySegment::Arc { center, radius, start, sweep } => center + Vec2::from_angle(start + sweep) * radius,
        }
    }

    pub fn is_arc(&self) -> bool {
        matches!(self, BoundarySegment::Arc { .. })
    }

    /// True for arcs bulging into the domain.
    pub fn is_dispersing(&self) -> bool {
        matches!(*self, BoundarySegment::Arc { sweep, .. } if sweep < 0.0)
    }

    pub fn length(&self) -> f64 {
        match *self {
            BoundarySegment::Line { a, b } => a.distance(b),
            BoundarySegment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Point at normalized arclength parameter `s` in `[0, 1]`.
    pub fn point_at(&self, s: f64) -> Vec2 {
        match *self {
            BoundarySegment::Line { a, b } => a + (b - a) * s,
            BoundarySegment::Arc { center, radius, start, sweep } => {
                center + Vec2::from_angle(start + sweep * s) * radius
            }
        }
    }

    /// Unit tangent along the direction of travel at parameter `s`.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        match *self {
            BoundarySegment::Line { a, b } => (b - a).normalized(),
            BoundarySegment::Arc { start, sweep, .. } => {
                let t = Vec2::from_angle(start + sweep * s).perp();
                if sweep >= 0.0 {
                    t
                } else {
                    -t
                }
            }
        }
    }

    /// Contribution to `1/2 ∮ (x dy - y dx)`.
    pub fn green_area(&self) -> f64 {
        match *self {
            BoundarySegment::Line { a, b } => 0.5 * a.cross(b),
            BoundarySegment::Arc { center, radius, start, sweep } => {
                let end = start + sweep;
                0.5 * (radius * center.x * (end.sin() - start.sin()) - radius * center.y * (end.cos() - start.cos())
                    + radius * radius * sweep)
            }
        }
    }

    /// Whether polar angle `phi` (about the arc center) lies on the arc.
    fn arc_contains_angle(start: f64, sweep: f64, phi: f64, tol: f64) -> bool {
        let rel = if sweep >= 0.0 { phi - start } else { start - phi };
        let rel = rel.rem_euclid(TAU);
        rel <= sweep.abs() + tol || rel >= TAU - tol
    }

    /// Closest point on the segment to `p`.
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        match *self {
            BoundarySegment::Line { a, b } => {
                let d = b - a;
                let s = ((p - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
                a + d * s
            }
            BoundarySegment::Arc { center, radius, start, sweep } => {
                let rel = p - center;
                if rel.norm() > 0.0 && Self::arc_contains_angle(start, sweep, rel.angle(), 0.0) {
                    center + rel.normalized() * radius
                } else {
                    let (s, e) = (self.start(), self.end());
                    if p.distance(s) <= p.distance(e) {
                        s
                    } else {
                        e
                    }
                }
            }
        }
    }

    pub fn distance(&self, p: Vec2) -> f64 {
        p.distance(self.closest_point(p))
    }

    /// Smallest hit with `t > t_min` of the ray `origin + t * dir`.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2, t_min: f64) -> Option<RayHit> {
        match *self {
            BoundarySegment::Line { a, b } => {
                let e = b - a;
                let denom = dir.cross(e);
                if denom == 0.0 {
                    return None;
                }
                let w = a - origin;
                let t = w.cross(e) / denom;
                let s = w.cross(dir) / denom;
                if t > t_min && (-1e-12..=1.0 + 1e-12).contains(&s) {
                    // Outward normal is to the right of travel.
                    let normal = Vec2::new(e.y, -e.x).normalized();
                    Some(RayHit { t, point: origin + dir * t, normal })
                } else {
                    None
                }
            }
            BoundarySegment::Arc { center, radius, start, sweep } => {
                let oc = origin - center;
                let qa = dir.norm_sq();
                let qb = oc.dot(dir);
                let qc = oc.norm_sq() - radius * radius;
                let disc = qb * qb - qa * qc;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // Numerically stable pair of roots.
                let q = -(qb + qb.signum() * sq);
                let (mut r1, mut r2) = if q != 0.0 { (q / qa, qc / q) } else { (0.0, 0.0) };
                if r1 > r2 {
                    std::mem::swap(&mut r1, &mut r2);
                }
                let angle_tol = 1e-12 / radius.max(1e-300);
                for t in [r1, r2] {
                    if t > t_min {
                        let point = origin + dir * t;
                        let radial = point - center;
                        if Self::arc_contains_angle(start, sweep, radial.angle(), angle_tol) {
                            let outward = radial / radius;
                            // Focusing arcs: domain is toward the center.
                            let normal = if sweep >= 0.0 { outward } else { -outward };
                            return Some(RayHit { t, point, normal });
                        }
                    }
                }
                None
            }
        }
    }

    /// Crossings of the horizontal ray `{(x, p.y) : x > p.x}`.
    pub fn ray_crossings(&self, p: Vec2) -> usize {
        match *self {
            BoundarySegment::Line { a, b } => {
                if (a.y > p.y) != (b.y > p.y) {
                    let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    usize::from(x > p.x)
                } else {
                    0
                }
            }
            BoundarySegment::Arc { center, radius, start, sweep } => {
                let dy = p.y - center.y;
                let disc = radius * radius - dy * dy;
                if disc <= 0.0 {
                    return 0;
                }
                let dx = disc.sqrt();
                let mut n = 0;
                for x in [center.x - dx, center.x + dx] {
                    if x > p.x {
                        let phi = dy.atan2(x - center.x);
                        // Half-open in the angle to avoid double counting at shared endpoints.
                        let rel = if sweep >= 0.0 { phi - start } else { start - phi };
                        let rel = rel.rem_euclid(TAU);
                        if rel < sweep.abs() {
                            n += 1;
                        }
                    }
                }
                n
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            BoundarySegment::Line { a, b } => BoundarySegment::Line { a: a * s, b: b * s },
            BoundarySegment::Arc { center, radius, start, sweep } => {
                BoundarySegment::Arc { center: center * s, radius: radius * s, start, sweep }
            }
        }
    }

    /// Mirror image under `x -> -x` (if `flip_x`) and/or `y -> -y`, with
    /// the direction of travel reversed so that orientation is preserved.
    pub fn mirrored(&self, flip_x: bool, flip_y: bool) -> Self {
        let m = |v: Vec2| Vec2::new(if flip_x { -v.x } else { v.x }, if flip_y { -v.y } else { v.y });
        let odd = flip_x ^ flip_y;
        match *self {
            BoundarySegment::Line { a, b } => {
                if odd {
                    BoundarySegment::Line { a: m(b), b: m(a) }
                } else {
                    BoundarySegment::Line { a: m(a), b: m(b) }
                }
            }
            BoundarySegment::Arc { center, radius, start, sweep } => {
                let mirror_angle = |t: f64| {
                    let v = m(Vec2::from_angle(t));
                    v.angle()
                };
                if odd {
                    let end = mirror_angle(start + sweep);
                    BoundarySegment::Arc { center: m(center), radius, start: end, sweep }
                } else {
                    BoundarySegment::Arc { center: m(center), radius, start: mirror_angle(start), sweep }
                }
            }
        }
    }

    /// Split at normalized parameter `s` into two pieces.
    pub fn split_at(&self, s: f64) -> (Self, Self) {
        match *self {
            BoundarySegment::Line { a, b } => {
                let m = self.point_at(s);
                (BoundarySegment::Line { a, b: m }, BoundarySegment::Line { a: m, b })
            }
            BoundarySegment::Arc { center, radius, start, sweep } => (
                BoundarySegment::Arc { center, radius, start, sweep: sweep * s },
                BoundarySegment::Arc { center, radius, start: start + sweep * s, sweep: sweep * (1.0 - s) },
            ),
        }
    }

    /// Normalized parameter of the point on the segment closest to `p`.
    pub fn parameter_of(&self, p: Vec2) -> f64 {
        match *self {
            BoundarySegment::Line { a, b } => {
                let d = b - a;
                ((p - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0)
            }
            BoundarySegment::Arc { center, start, sweep, .. } => {
                let phi = (p - center).angle();
                let rel = if sweep >= 0.0 { phi - start } else { start - phi };
                let mut rel = rel.rem_euclid(TAU);
                if rel > sweep.abs() + 0.5 * (TAU - sweep.abs()) {
                    rel -= TAU;
                }
                (rel / sweep.abs()).clamp(0.0, 1.0)
            }
        }
    }

    /// Polyline samples (including both endpoints) with chord length at most `h`.
    pub fn sample(&self, h: f64) -> Vec<Vec2> {
        let n = (self.length() / h).ceil().max(1.0) as usize;
        (0..=n).map(|i| self.point_at(i as f64 / n as f64)).collect()
    }
}

/// Normalize an angle to `(-PI, PI]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_circle_area_and_length() {
        let arc = BoundarySegment::arc(Vec2::ZERO, 1.0, 0.0, TAU);
        assert_relative_eq!(arc.green_area(), PI, epsilon = 1e-14);
        assert_relative_eq!(arc.length(), TAU, epsilon = 1e-14);
    }

    #[test]
    fn line_ray_hit_has_outward_normal() {
        // Right wall of a CCW square, traversed upward.
        let wall = BoundarySegment::line(Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0));
        let hit = wall.ray_hit(Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.0), 0.0).unwrap();
        assert_relative_eq!(hit.t, 0.5);
        assert_relative_eq!(hit.normal.x, 1.0);
    }

    #[test]
    fn dispersing_arc_normal_points_into_scatterer() {
        // Clockwise arc: the domain is outside the circle.
        let arc = BoundarySegment::arc(Vec2::ZERO, 1.0, PI, -PI);
        let hit = arc.ray_hit(Vec2::new(0.0, 3.0), Vec2::new(0.0, -1.0), 0.0).unwrap();
        assert_relative_eq!(hit.t, 2.0, epsilon = 1e-14);
        assert_relative_eq!(hit.normal.y, -1.0, epsilon = 1e-14);
        assert!(arc.is_dispersing());
    }

    #[test]
    fn mirrored_arc_keeps_orientation() {
        let arc = BoundarySegment::arc(Vec2::new(1.0, 2.0), 0.5, 0.3, 1.1);
        let m = arc.mirrored(true, false);
        assert_relative_eq!(m.start().x, -arc.end().x, epsilon = 1e-14);
        assert_relative_eq!(m.start().y, arc.end().y, epsilon = 1e-14);
        assert_relative_eq!(m.green_area(), arc.green_area(), epsilon = 1e-14);
    }

    #[test]
    fn split_preserves_length() {
        let arc = BoundarySegment::arc(Vec2::ZERO, 2.0, 0.2, -1.4);
        let (p, q) = arc.split_at(0.3);
        assert_relative_eq!(p.length() + q.length(), arc.length(), epsilon = 1e-14);
        assert_relative_eq!(p.end().x, q.start().x, epsilon = 1e-14);
        assert_relative_eq!(arc.parameter_of(p.end()), 0.3, epsilon = 1e-12);
    }
}
