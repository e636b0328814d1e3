//! Billiard domains: polygons, disk-eroded effective billiards and
//! reflex-rounded comparison billiards.
//!
//! Boundaries run counterclockwise with the outward normal to the right of
//! the direction of travel. Lengths are in units of the square root of the
//! billiard area.

mod domain;
mod offset;
pub mod presets;
mod quadrant;
mod segment;
mod vec2;

pub use domain::{shoelace, BilliardDomain, PolygonSpec, Symmetry};
pub use offset::{erode, round_reflex_corners};
pub use quadrant::{symmetry_quadrant, CutAxis, QuadrantDomain};
pub use segment::{wrap_angle, BoundarySegment, RayHit};
pub use vec2::{Point2, Vec2};

/// Closure and membership tolerance.
pub const EPS_GEO: f64 = 1e-9;

/// Area of the domain; Green's theorem over lines and arcs.
pub fn area(domain: &BilliardDomain) -> f64 {
    domain.area()
}

pub fn perimeter(domain: &BilliardDomain) -> f64 {
    domain.perimeter()
}

/// Domain bounded by the polygon's edges.
pub fn polygon_to_domain(spec: &PolygonSpec) -> BilliardDomain {
    BilliardDomain::from_polygon(spec)
}
