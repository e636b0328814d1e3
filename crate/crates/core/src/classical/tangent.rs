//! Linearized (tangent-map) propagation of a phase-space displacement.
//!
//! Used as an independent check of the finite-difference brackets.

use super::flight::{reflect, Billiard, ParticleState};
use crate::error::{Error, Result};
use crate::geometry::{BoundarySegment, Vec2};

/// Displacement `(dr, dv)` attached to a reference trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tangent {
    pub dr: Vec2,
    pub dv: Vec2,
}

/// Signed curvature factor of the wall: `dn = kappa * dr` along the wall.
fn wall_curvature(seg: &BoundarySegment) -> f64 {
    match *seg {
        BoundarySegment::Line { .. } => 0.0,
        BoundarySegment::Arc { radius, sweep, .. } => {
            if sweep < 0.0 {
                -1.0 / radius
            } else {
                1.0 / radius
            }
        }
    }
}

/// Map a displacement through one specular collision with pre-collision
/// velocity `v` and outward normal `n`.
pub fn collision_map(t: Tangent, v: Vec2, n: Vec2, kappa: f64) -> Tangent {
    let vn = v.dot(n);
    let dt = -n.dot(t.dr) / vn;
    let dr_c = t.dr + v * dt;
    let dn = dr_c * kappa;
    let dr = reflect(t.dr, n);
    let dv = reflect(t.dv, n) - (n * v.dot(dn) + dn * vn) * 2.0;
    Tangent { dr, dv }
}

/// Propagate `(state, tangent)` for `duration`, sampling the displacement at
/// the sorted `times`. Returns `None` if the reference run hits a corner.
pub fn propagate_tangent(
    billiard: &Billiard<'_>,
    initial: ParticleState,
    tangent: Tangent,
    duration: f64,
    times: &[f64],
) -> Result<Option<Vec<Tangent>>> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be > 0, got {duration}")));
    }
    let segs = billiard.domain().segments();
    let mut state = initial;
    let mut tan = tangent;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut k = 0;
    loop {
        let ev = billiard.next_collision(&state)?;
        let t_hit = now + ev.time;
        while k < times.len() && times[k] <= t_hit.min(duration) {
            let dt = times[k] - now;
            out.push(Tangent { dr: tan.dr + tan.dv * dt, dv: tan.dv });
            k += 1;
        }
        if t_hit >= duration {
            return Ok(Some(out));
        }
        if ev.at_corner {
            return Ok(None);
        }
        tan.dr = tan.dr + tan.dv * ev.time;
        tan = collision_map(tan, state.velocity, ev.normal, wall_curvature(&segs[ev.segment]));
        now = t_hit;
        state.position = ev.point;
        state.velocity = reflect(state.velocity, ev.normal);
    }
}

/// `dx(t)/dx(0)` at fixed momentum from the tangent map.
pub fn tangent_bracket(
    billiard: &Billiard<'_>,
    initial: ParticleState,
    duration: f64,
    times: &[f64],
) -> Result<Option<Vec<f64>>> {
    let t0 = Tangent { dr: Vec2::new(1.0, 0.0), dv: Vec2::ZERO };
    Ok(propagate_tangent(billiard, initial, t0, duration, times)?.map(|v| v.into_iter().map(|t| t.dr.x).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{presets, BilliardDomain};

    #[test]
    fn flat_wall_is_a_reflection() {
        let t = Tangent { dr: Vec2::new(0.3, -0.7), dv: Vec2::new(0.1, 0.2) };
        let n = Vec2::new(0.0, 1.0);
        let out = collision_map(t, Vec2::new(0.6, 0.8), n, 0.0);
        assert_eq!(out.dr, Vec2::new(0.3, 0.7));
        assert_eq!(out.dv, Vec2::new(0.1, -0.2));
    }

    #[test]
    fn rectangle_bracket_is_unit() {
        let d = BilliardDomain::from_polygon(&presets::rectangle(2.0, 0.5));
        let b = Billiard::new(&d);
        let times: Vec<f64> = (0..50).map(|k| 0.2 * k as f64).collect();
        let s = ParticleState::new(Vec2::new(0.3, 0.2), Vec2::new(0.8, 0.6));
        let br = tangent_bracket(&b, s, 10.0, &times).unwrap().unwrap();
        for x in br {
            assert!((x.abs() - 1.0).abs() < 1e-12);
        }
    }

    /// Head-on bounce off a dispersing disk of radius R after a flight of
    /// length l: a transverse offset grows by the factor 1 + 2l/R.
    #[test]
    fn dispersing_head_on_gain() {
        let r = 0.5;
        let n = Vec2::new(-1.0, 0.0);
        let t = Tangent { dr: Vec2::new(0.0, 1.0), dv: Vec2::ZERO };
        let out = collision_map(t, Vec2::new(-1.0, 0.0), n, -1.0 / r);
        let l = 0.7;
        let dr = out.dr + out.dv * l;
        assert!((dr.y - (1.0 + 2.0 * l / r)).abs() < 1e-12);
    }
}
