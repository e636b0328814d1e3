//! Wave-packet dynamics in an eigenbasis and the out-of-time-ordered
//! correlator `C(t) = -<[x(t), p_x(0)]^2>`.

mod operators;
mod otoc;
mod packet;

pub use operators::{
    build_operator_matrices, p_consistency, project_operator, x_derivative, x_mass, OperatorMatrices, PConsistency,
};
pub use otoc::{
    ehrenfest_time, fit_otoc_growth, log_otoc, log_otoc_with, otoc, saturation_window, time_grid,
    truncation_robustness, OtocSeries, TruncationCheck, DEFAULT_LOG_BUDGET, DEFAULT_SATURATION_FRACTION, LOG_FLOOR,
    TRUNCATION_TOL,
};
pub use packet::{
    project_packet, project_packet_with, ProjectionOptions, SpectralState, WavePacketSpec, DEFAULT_NORM_THRESHOLD,
    DEFAULT_WALL_MARGIN,
};
