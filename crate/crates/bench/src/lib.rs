//! Shared workloads for the benchmarks.

use billiard_core::analytic::{rectangle_basis, RectangleBasis, RectangleSpec};
use billiard_core::classical::WignerEnsembleSpec;
use billiard_core::geometry::{presets, round_reflex_corners, BilliardDomain, Vec2};
use billiard_core::quantum::{OperatorMatrices, SpectralState};

/// Butterfly scaled to unit area.
pub fn butterfly() -> BilliardDomain {
    BilliardDomain::from_polygon(&presets::butterfly().normalized().0)
}

pub fn rounded_butterfly() -> BilliardDomain {
    let spec = presets::butterfly().normalized().0;
    round_reflex_corners(&spec, presets::BUTTERFLY_ROUNDING_RADIUS).expect("valid rounding")
}

/// Wigner ensemble at the standard butterfly launch.
pub fn launch(hbar: f64, samples: usize) -> WignerEnsembleSpec {
    let mut s = WignerEnsembleSpec::new(
        Vec2::new(0.36, 0.1),
        Vec2::from_angle(std::f64::consts::FRAC_PI_3),
        std::f64::consts::FRAC_1_SQRT_2,
        hbar,
    );
    s.n_samples = samples;
    s.wall_margin = 1.0;
    s
}

/// Analytic unit-square basis with `modes` states per axis.
pub struct SquareProblem {
    pub basis: RectangleBasis,
    pub ops: OperatorMatrices,
    pub state: SpectralState,
    pub hbar: f64,
}

pub fn square_problem(modes: usize, hbar: f64) -> SquareProblem {
    let basis =
        rectangle_basis(&RectangleSpec { a: 1.0, b: 1.0, nx: modes, ny: modes }, hbar).expect("valid rectangle");
    let ops = basis.operators();
    let state = basis.packet((0.4, 0.55), (0.8, 0.6), std::f64::consts::FRAC_1_SQRT_2).expect("packet inside");
    SquareProblem { basis, ops, state, hbar }
}
