//! Named experiment configurations.

use billiard_core::geometry::presets::BUTTERFLY_ROUNDING_RADIUS;

use crate::config::{ClassicalConfig, EnsembleConfig, ExperimentConfig, Transform};

pub const NAMES: &[&str] = &[
    "square-box-validation",
    "butterfly",
    "butterfly-rounded",
    "butterfly-eroded",
    "butterfly-sweep",
    "butterfly-fine",
    "triangle",
    "quadrilateral-ensemble",
];

/// One-line descriptions, aligned with [`NAMES`].
pub const DESCRIPTIONS: &[&str] = &[
    "unit square at hbar = 1/16 against the analytic rectangle reference",
    "polygonal butterfly at hbar = 2^-5: C, L and C_cl",
    "butterfly with filleted reflex corners at hbar = 2^-5",
    "butterfly eroded by the packet width at hbar = 2^-6",
    "polygonal butterfly at hbar = 2^-5 and 2^-6 from one solve",
    "polygonal butterfly at hbar = 2^-7 (hours of compute, about 6 GB of memory)",
    "irrational triangle at hbar = 2^-4",
    "quadrilateral, ln C averaged over eight launches, hbar = 2^-4 and 2^-5",
];

pub const DESK_HBAR_COARSE: f64 = 1.0 / 32.0;
pub const DESK_HBAR_FINE: f64 = 1.0 / 64.0;

fn butterfly(name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig { name: name.into(), hbar: vec![DESK_HBAR_COARSE], ..Default::default() };
    c.spectral.h = Some(0.006);
    c.spectral.states = Some(120);
    c.time.log_stride = 6;
    c
}

pub fn get(name: &str) -> Option<ExperimentConfig> {
    Some(match name {
        "square-box-validation" => {
            let mut c = ExperimentConfig { name: name.into(), hbar: vec![1.0 / 16.0], ..Default::default() };
            c.domain.preset = "unit-square".into();
            c.packet.r0 = [0.5, 0.5];
            c.packet.theta = 0.4;
            c.packet.wall_margin = 2.5;
            c.spectral.h = Some(0.007);
            c.spectral.states = Some(220);
            c.time.t_max = 4.0;
            c.time.steps = 81;
            c.fit.end = Some(4.0);
            c.classical = ClassicalConfig { fit_end: 4.0, ..Default::default() };
            c
        }
        "butterfly" => butterfly(name),
        "butterfly-rounded" => {
            let mut c = butterfly(name);
            c.domain.transform = Transform::Round { radius: BUTTERFLY_ROUNDING_RADIUS };
            c
        }
        "butterfly-eroded" => {
            let mut c = butterfly(name);
            c.hbar = vec![DESK_HBAR_FINE];
            c.domain.transform = Transform::Erode { radius: None };
            c.spectral.h = Some(0.0035);
            c.spectral.states = Some(240);
            c.time.log_stride = 0;
            c.classical.lyapunov_duration = 20.0;
            c
        }
        "butterfly-sweep" => {
            let mut c = butterfly(name);
            c.hbar = vec![DESK_HBAR_COARSE, DESK_HBAR_FINE];
            c.spectral.h = Some(0.0035);
            c.spectral.states = Some(240);
            c.time.log_stride = 0;
            c.classical.enabled = false;
            c
        }
        "butterfly-fine" => {
            let mut c = butterfly(name);
            c.hbar = vec![1.0 / 128.0];
            c.spectral.h = Some(0.0025);
            c.spectral.states = Some(950);
            c.time.log_stride = 0;
            c
        }
        "triangle" => {
            let mut c = ExperimentConfig { name: name.into(), hbar: vec![1.0 / 16.0], ..Default::default() };
            c.domain.preset = "triangle".into();
            c.packet.r0 = [0.12, -0.03];
            c.spectral.h = Some(0.012);
            c.spectral.states = Some(200);
            c
        }
        "quadrilateral-ensemble" => {
            let mut c = ExperimentConfig {
                name: name.into(),
                hbar: vec![1.0 / 16.0, 1.0 / 32.0],
                ensemble: Some(EnsembleConfig { launches: 8, spread: 0.05 }),
                ..Default::default()
            };
            c.domain.preset = "quadrilateral".into();
            c.packet.r0 = [0.34, -0.19];
            c.classical.enabled = false;
            c
        }
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        assert_eq!(NAMES.len(), DESCRIPTIONS.len());
        for name in NAMES {
            let c = get(name).unwrap();
            c.validate().unwrap();
            assert_eq!(&c.name, name);
            assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
            for &h in &c.hbar {
                c.domain(h).unwrap();
            }
        }
        assert!(get("nope").is_none());
    }
}
