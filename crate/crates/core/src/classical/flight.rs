use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BilliardDomain, Point2, Vec2, EPS_GEO};

/// Position and velocity of a point particle (mass 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub position: Point2,
    pub velocity: Vec2,
}

impl ParticleState {
    pub fn new(position: Point2, velocity: Vec2) -> Self {
        Self { position, velocity }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionEvent {
    /// Time from the current state to impact.
    pub time: f64,
    pub point: Point2,
    pub segment: usize,
    /// Unit normal pointing out of the domain.
    pub normal: Vec2,
    /// Impact within `EPS_GEO` of a boundary corner.
    pub at_corner: bool,
}

/// Specular reflection `v - 2 (v.n) n`.
#[inline]
pub fn reflect(v: Vec2, n: Vec2) -> Vec2 {
    v - n * (2.0 * v.dot(n))
}

/// Event-driven propagator bound to one domain.
#[derive(Clone, Debug)]
pub struct Billiard<'a> {
    domain: &'a BilliardDomain,
    corners: Vec<Point2>,
    smooth_joint: Vec<bool>,
    /// Minimum advance along the ray after a reflection, in length units.
    min_advance: f64,
}

/// Sampled trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Positions at the requested times (truncated if the run hit a corner).
    pub positions: Vec<Point2>,
    pub velocities: Vec<Vec2>,
    /// Boundary segment hit by each collision, in order.
    pub collisions: Vec<usize>,
    /// Number of collisions up to each sample.
    pub collisions_at_sample: Vec<usize>,
    /// The run was terminated at a corner at this time.
    pub corner_hit: Option<f64>,
    pub final_state: ParticleState,
    /// Largest relative speed drift seen along the run.
    pub max_speed_drift: f64,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.corner_hit.is_none()
    }
}

impl<'a> Billiard<'a> {
    pub fn new(domain: &'a BilliardDomain) -> Self {
        let n = domain.segments().len();
        Self {
            domain,
            corners: domain.corners(),
            smooth_joint: (0..n).map(|i| !domain.is_corner(i)).collect(),
            min_advance: 1e-12 * domain.diameter(),
        }
    }

    pub fn domain(&self) -> &BilliardDomain {
        self.domain
    }

    /// Whether segments `a` and `b` meet at a tangent-continuous junction.
    pub fn smooth_neighbors(&self, a: usize, b: usize) -> bool {
        let n = self.smooth_joint.len();
        if (a + 1) % n == b {
            self.smooth_joint[b]
        } else if (b + 1) % n == a {
            self.smooth_joint[a]
        } else {
            false
        }
    }

    /// First boundary impact strictly ahead of `state`.
    pub fn next_collision(&self, state: &ParticleState) -> Result<CollisionEvent> {
        let speed = state.speed();
        if !(speed > 0.0) {
            return Err(Error::InvalidArgument("particle speed must be positive".into()));
        }
        let t_min = self.min_advance / speed;
        let mut best: Option<(usize, crate::geometry::RayHit)> = None;
        for (i, seg) in self.domain.segments().iter().enumerate() {
            if let Some(hit) = seg.ray_hit(state.position, state.velocity, t_min) {
                if best.as_ref().is_none_or(|(_, b)| hit.t < b.t) {
                    best = Some((i, hit));
                }
            }
        }
        let (segment, hit) = best.ok_or_else(|| {
            Error::GeometryLeak(format!(
                "position ({:.17e}, {:.17e}) velocity ({:.17e}, {:.17e})",
                state.position.x, state.position.y, state.velocity.x, state.velocity.y
            ))
        })?;
        let at_corner = self.corners.iter().any(|c| c.distance(hit.point) <= EPS_GEO);
        Ok(CollisionEvent { time: hit.t, point: hit.point, segment, normal: hit.normal, at_corner })
    }

    /// Propagate for `duration`, sampling at the sorted `times` (in `[0, duration]`).
    pub fn evolve(&self, initial: ParticleState, duration: f64, times: &[f64]) -> Result<Trajectory> {
        let speed0 = initial.speed();
        let mut state = initial;
        let mut now = 0.0;
        let mut positions = Vec::with_capacity(times.len());
        let mut velocities = Vec::with_capacity(times.len());
        let mut collisions_at_sample = Vec::with_capacity(times.len());
        let mut collisions = Vec::new();
        let mut next_sample = 0;
        let mut max_speed_drift: f64 = 0.0;
        let mut corner_hit = None;

        loop {
            let ev = self.next_collision(&state)?;
            let t_hit = now + ev.time;
            while next_sample < times.len() && times[next_sample] <= t_hit.min(duration) {
                let dt = times[next_sample] - now;
                positions.push(state.position + state.velocity * dt);
                velocities.push(state.velocity);
                collisions_at_sample.push(collisions.len());
                next_sample += 1;
            }
            if t_hit >= duration {
                state.position = state.position + state.velocity * (duration - now);
                break;
            }
            if ev.at_corner {
                corner_hit = Some(t_hit);
                state.position = ev.point;
                break;
            }
            now = t_hit;
            state.position = ev.point;
            state.velocity = reflect(state.velocity, ev.normal);
            collisions.push(ev.segment);
            max_speed_drift = max_speed_drift.max((state.speed() - speed0).abs() / speed0);
        }
        Ok(Trajectory {
            positions,
            velocities,
            collisions,
            collisions_at_sample,
            corner_hit,
            final_state: state,
            max_speed_drift,
        })
    }

    /// Whether two partner trajectories took the same path through the
    /// boundary, allowing swaps only across smooth junctions.
    pub fn same_itinerary(&self, a: &[usize], b: &[usize]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(&x, &y)| x == y || self.smooth_neighbors(x, y))
    }
}

/// Free-function form of [`Billiard::next_collision`].
pub fn next_collision(state: &ParticleState, domain: &BilliardDomain) -> Result<CollisionEvent> {
    Billiard::new(domain).next_collision(state)
}

/// Free-function form of [`Billiard::evolve`].
pub fn evolve(state: ParticleState, duration: f64, domain: &BilliardDomain, times: &[f64]) -> Result<Trajectory> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be > 0, got {duration}")));
    }
    Billiard::new(domain).evolve(state, duration, times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{presets, BoundarySegment};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn square() -> BilliardDomain {
        BilliardDomain::from_polygon(&presets::unit_square())
    }

    fn disk() -> BilliardDomain {
        BilliardDomain::new(
            (0..4).map(|k| BoundarySegment::arc(Vec2::ZERO, 1.0, k as f64 * PI / 2.0, PI / 2.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn square_collision() {
        let ev = next_collision(&ParticleState::new(Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.0)), &square()).unwrap();
        assert_relative_eq!(ev.time, 0.5);
        assert_relative_eq!(ev.point.x, 1.0);
        assert_relative_eq!(ev.point.y, 0.5);
        assert_relative_eq!(ev.normal.x, 1.0);
        assert!(!ev.at_corner);
    }

    #[test]
    fn disk_collision() {
        let ev = next_collision(&ParticleState::new(Vec2::ZERO, Vec2::new(1.0, 0.0)), &disk()).unwrap();
        assert_relative_eq!(ev.time, 1.0, epsilon = 1e-14);
        assert_relative_eq!(ev.point.x, 1.0, epsilon = 1e-14);
        assert_relative_eq!(ev.normal.x, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn corner_aimed_ray() {
        let s = ParticleState::new(Vec2::new(0.5, 0.5), Vec2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        let ev = next_collision(&s, &square()).unwrap();
        assert!(ev.point.distance(Vec2::new(1.0, 1.0)) <= EPS_GEO);
        assert!(ev.at_corner);
        let tr = evolve(s, 3.0, &square(), &[0.5, 1.0]).unwrap();
        assert!(tr.corner_hit.is_some());
        assert_eq!(tr.positions.len(), 1);
    }

    #[test]
    fn reflection_examples() {
        let s = FRAC_1_SQRT_2;
        let v = reflect(Vec2::new(s, -s), Vec2::new(0.0, -1.0));
        assert_relative_eq!(v.x, s);
        assert_relative_eq!(v.y, s);
        assert_eq!(reflect(Vec2::new(0.0, -1.0), Vec2::new(0.0, -1.0)), Vec2::new(0.0, 1.0));
        assert_eq!(reflect(Vec2::new(1.0, 0.0), Vec2::new(0.0, -1.0)), Vec2::new(1.0, 0.0));
    }

    #[test]
    fn horizontal_launch_is_triangle_wave() {
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1).collect();
        let tr = evolve(ParticleState::new(Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.0)), 4.0, &square(), &times).unwrap();
        for (t, p) in times.iter().zip(&tr.positions) {
            // Period 2: x = 0.5 + t folded into [0, 1].
            let u = (0.5 + t).rem_euclid(2.0);
            let expect = if u <= 1.0 { u } else { 2.0 - u };
            assert!((p.x - expect).abs() < 1e-12, "t={t}: {} vs {expect}", p.x);
            assert_relative_eq!(p.y, 0.5);
        }
    }

    #[test]
    fn smooth_neighbors_on_rounded_butterfly() {
        let (spec, _) = presets::butterfly().normalized();
        let d = crate::geometry::round_reflex_corners(&spec, presets::BUTTERFLY_ROUNDING_RADIUS).unwrap();
        let b = Billiard::new(&d);
        let arc = d.segments().iter().position(|s| s.is_arc()).unwrap();
        let n = d.segments().len();
        assert!(b.smooth_neighbors(arc, (arc + 1) % n));
        assert!(b.smooth_neighbors((arc + n - 1) % n, arc));
        assert!(!b.smooth_neighbors((arc + 1) % n, (arc + 2) % n));
    }
}
