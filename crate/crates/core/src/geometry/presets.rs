//! Shipped billiard shapes.
//!
//! Coordinates are raw; call [`PolygonSpec::normalized`] to rescale to unit
//! area. The butterfly has both axis reflection symmetries and two
//! right-angle reflex notches on the `y` axis. The quadrilateral is a
//! triangle with a reflex notch driven in to the origin.

use super::{PolygonSpec, Vec2};

/// Fillet radius of the smoothened butterfly, `(sqrt 2 - 1) / (16 sqrt 2)`,
/// in unit-area coordinates.
pub const BUTTERFLY_ROUNDING_RADIUS: f64 = (std::f64::consts::SQRT_2 - 1.0) / (16.0 * std::f64::consts::SQRT_2);

fn poly(v: &[(f64, f64)]) -> PolygonSpec {
    PolygonSpec::new(v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).expect("preset polygons are valid")
}

pub fn butterfly() -> PolygonSpec {
    poly(&[
        (0.0, -0.3),
        (0.5, -0.8),
        (1.3, -0.5),
        (1.3, 0.5),
        (0.5, 0.8),
        (0.0, 0.3),
        (-0.5, 0.8),
        (-1.3, 0.5),
        (-1.3, -0.5),
        (-0.5, -0.8),
    ])
}

/// Non-convex quadrilateral; its reflex vertex sits at the origin.
pub fn quadrilateral() -> PolygonSpec {
    poly(&[(-0.7, -0.45), (0.95, -0.62), (0.18, 1.0), (0.0, 0.0)])
}

/// The quadrilateral with its reflex vertex removed: a generic (irrational) triangle.
pub fn triangle() -> PolygonSpec {
    poly(&[(-0.7, -0.45), (0.95, -0.62), (0.18, 1.0)])
}

pub fn unit_square() -> PolygonSpec {
    square(1.0)
}

/// `[0, side]^2`.
pub fn square(side: f64) -> PolygonSpec {
    rectangle(side, side)
}

/// `[0, a] x [0, b]`.
pub fn rectangle(a: f64, b: f64) -> PolygonSpec {
    poly(&[(0.0, 0.0), (a, 0.0), (a, b), (0.0, b)])
}

/// Square of the given side centered at the origin.
pub fn centered_square(side: f64) -> PolygonSpec {
    centered_rectangle(side, side)
}

pub fn centered_rectangle(a: f64, b: f64) -> PolygonSpec {
    let (x, y) = (0.5 * a, 0.5 * b);
    poly(&[(-x, -y), (x, -y), (x, y), (-x, y)])
}

/// L-shaped hexagon with a single reflex vertex at `(0.5, 0.5)`.
pub fn l_hexagon() -> PolygonSpec {
    poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (0.5, 0.5), (0.5, 1.0), (0.0, 1.0)])
}

pub fn asymmetric_triangle() -> PolygonSpec {
    poly(&[(-0.5, -0.4), (0.6, -0.3), (0.1, 0.7)])
}

/// Look up a polygon preset by name.
pub fn by_name(name: &str) -> Option<PolygonSpec> {
    Some(match name {
        "butterfly" => butterfly(),
        "quadrilateral" => quadrilateral(),
        "triangle" => triangle(),
        "unit-square" => unit_square(),
        "centered-square" => centered_square(1.0),
        "rectangle-2x0.5" => rectangle(2.0, 0.5),
        "l-hexagon" => l_hexagon(),
        _ => return None,
    })
}

pub const NAMES: &[&str] =
    &["butterfly", "quadrilateral", "triangle", "unit-square", "centered-square", "rectangle-2x0.5", "l-hexagon"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BilliardDomain;

    #[test]
    fn butterfly_is_normalizable_and_symmetric() {
        let (b, _) = butterfly().normalized();
        let d = BilliardDomain::from_polygon(&b);
        assert!((d.area() - 1.0).abs() < 1e-12);
        assert!(d.symmetry().mirror_x && d.symmetry().mirror_y);
        assert_eq!(b.reflex_vertices().len(), 2);
    }

    #[test]
    fn quadrilateral_reflex_at_origin() {
        let q = quadrilateral();
        let r = q.reflex_vertices();
        assert_eq!(r.len(), 1);
        assert_eq!(q.vertices()[r[0]], Vec2::ZERO);
        assert!(triangle().reflex_vertices().is_empty());
    }

    #[test]
    fn rounding_radius_value() {
        assert!((BUTTERFLY_ROUNDING_RADIUS - 0.018305826175840782).abs() < 1e-15);
    }

    #[test]
    fn all_names_resolve() {
        for n in NAMES {
            assert!(by_name(n).is_some(), "{n}");
        }
        assert!(by_name("nope").is_none());
    }
}
