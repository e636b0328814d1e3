//! Point-particle billiard dynamics and classical OTOC estimators.

mod ensemble;
mod flight;
mod lyapunov;
mod tangent;

pub use ensemble::{
    bracket_series, classical_otoc, poisson_bracket_xp, sample_wigner, ClassicalOtocSeries, WignerEnsembleSpec,
    DEFAULT_DELTA0, DEFAULT_SAMPLES, MAX_INVALID_FRACTION,
};
pub use flight::{evolve, next_collision, reflect, Billiard, CollisionEvent, ParticleState, Trajectory};
pub use lyapunov::{finite_time_lyapunov, finite_time_lyapunov_with, log_stretch_series, LyapunovEstimate};
pub use tangent::{collision_map, propagate_tangent, tangent_bracket, Tangent};
