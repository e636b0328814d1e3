//! Experiment configuration.
//!
//! Configs are TOML. Every field has a default, so a file only needs the
//! values it changes. Lengths are in units of `sqrt(A)` after the domain is
//! normalized to unit area; momenta are in units of `|p0| = 1`; `m = 1`.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use billiard_core::geometry::{erode, presets, round_reflex_corners, BilliardDomain, PolygonSpec, Vec2};
use billiard_core::quantum::{DEFAULT_NORM_THRESHOLD, DEFAULT_SATURATION_FRACTION};
use billiard_core::spectral::weyl_count;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: DomainConfig,
    /// Effective Planck constants; a sweep needs at least two.
    pub hbar: Vec<f64>,
    pub packet: PacketConfig,
    pub spectral: SpectralConfig,
    pub time: TimeConfig,
    pub fit: FitConfig,
    pub classical: ClassicalConfig,
    /// Average `ln C` over several launches around `packet.r0`.
    pub ensemble: Option<EnsembleConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    /// Polygon preset name; ignored when `vertices` is given.
    pub preset: String,
    pub vertices: Option<Vec<[f64; 2]>>,
    pub transform: Transform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Transform {
    None,
    /// Disk erosion; the default radius is the packet width `sigma sqrt(hbar / 2)`.
    Erode {
        radius: Option<f64>,
    },
    /// Reflex-corner fillets of the given radius.
    Round {
        radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    pub sigma: f64,
    pub r0: [f64; 2],
    /// Launch angle of `p0` in radians.
    pub theta: f64,
    /// Required wall clearance in units of `sigma sqrt(hbar)`.
    pub wall_margin: f64,
    pub norm_threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectorPolicy {
    /// Quarter-domain sectors when the domain has both reflection symmetries.
    Auto,
    Quarter,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// Maximum mesh edge; `None` picks `AUTO_H_PER_HBAR * min(hbar)`.
    pub h: Option<f64>,
    /// States per sector for quarter solves, total otherwise; `None` sizes
    /// the basis from Weyl's law.
    pub states: Option<usize>,
    pub sectors: SectorPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub t_max: f64,
    pub steps: usize,
    /// Evaluate `L(t)` on every `log_stride`-th sample; 0 disables it.
    pub log_stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Window start; defaults to the first wall collision of the packet center.
    pub start: Option<f64>,
    /// Window end; defaults to the saturation point of `ln(C / hbar^2)`.
    pub end: Option<f64>,
    pub saturation_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub enabled: bool,
    pub samples: usize,
    pub seed: u64,
    pub delta0: f64,
    /// End of the classical growth fit window.
    pub fit_end: f64,
    /// Duration of the finite-time Lyapunov run; 0 skips it.
    pub lyapunov_duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub launches: usize,
    /// Launch points fill a disk of this radius around `packet.r0`.
    pub spread: f64,
}

/// Default mesh size per unit of `hbar`.
pub const AUTO_H_PER_HBAR: f64 = 0.19;
/// Basis energy cutoff used when `states` is not given.
pub const AUTO_ENERGY_CUTOFF: f64 = 1.25;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            domain: DomainConfig::default(),
            hbar: vec![2f64.powi(-5)],
            packet: PacketConfig::default(),
            spectral: SpectralConfig::default(),
            time: TimeConfig::default(),
            fit: FitConfig::default(),
            classical: ClassicalConfig::default(),
            ensemble: None,
        }
    }
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { preset: "butterfly".into(), vertices: None, transform: Transform::None }
    }
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self {
            sigma: std::f64::consts::FRAC_1_SQRT_2,
            r0: [0.36, 0.1],
            theta: std::f64::consts::FRAC_PI_3,
            wall_margin: 1.0,
            norm_threshold: DEFAULT_NORM_THRESHOLD,
        }
    }
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { h: None, states: None, sectors: SectorPolicy::Auto }
    }
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_max: 6.0, steps: 121, log_stride: 0 }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { start: None, end: None, saturation_fraction: DEFAULT_SATURATION_FRACTION }
    }
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self { enabled: true, samples: 10_000, seed: 7, delta0: 1e-7, fit_end: 3.0, lyapunov_duration: 0.0 }
    }
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { launches: 8, spread: 0.05 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Check everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        if self.domain.vertices.is_none() && presets::by_name(&self.domain.preset).is_none() {
            bail!("unknown domain preset '{}' (known: {})", self.domain.preset, presets::NAMES.join(", "));
        }
        ensure!(!self.hbar.is_empty(), "hbar list is empty");
        ensure!(self.hbar.iter().all(|&h| h > 0.0 && h.is_finite()), "hbar values must be positive");
        let p = &self.packet;
        ensure!(p.sigma > 0.0, "sigma must be positive");
        ensure!(p.r0.iter().chain([&p.theta]).all(|v| v.is_finite()), "packet launch must be finite");
        ensure!(p.wall_margin >= 0.0, "wall_margin must be non-negative");
        if let Some(h) = self.spectral.h {
            ensure!(h > 0.0, "mesh size must be positive");
        }
        if let Some(n) = self.spectral.states {
            ensure!(n >= 2, "need at least two states");
        }
        ensure!(self.time.t_max > 0.0 && self.time.steps >= 2, "time grid needs t_max > 0 and >= 2 steps");
        let f = &self.fit;
        ensure!(f.saturation_fraction > 0.0 && f.saturation_fraction <= 1.0, "saturation_fraction must lie in (0, 1]");
        if let (Some(a), Some(b)) = (f.start, f.end) {
            ensure!(b > a, "fit window end must exceed its start");
        }
        let c = &self.classical;
        if c.enabled {
            ensure!(c.samples >= 100, "need at least 100 classical samples");
            ensure!(c.delta0 > 0.0, "delta0 must be positive");
            ensure!(c.fit_end > 0.0, "classical fit_end must be positive");
        }
        if let Some(e) = &self.ensemble {
            ensure!(e.launches >= 2, "an ensemble needs at least two launches");
            ensure!(e.spread >= 0.0, "ensemble spread must be non-negative");
        }
        match self.domain.transform {
            Transform::Erode { radius: Some(r) } => ensure!(r >= 0.0, "erosion radius must be non-negative"),
            Transform::Round { radius } => ensure!(radius > 0.0, "rounding radius must be positive"),
            _ => {}
        }
        Ok(())
    }

    /// The polygon, normalized to unit area.
    pub fn polygon(&self) -> Result<PolygonSpec> {
        let spec = match &self.domain.vertices {
            Some(v) => PolygonSpec::new(v.iter().map(|p| Vec2::new(p[0], p[1])).collect())?,
            None => presets::by_name(&self.domain.preset)
                .with_context(|| format!("unknown domain preset '{}'", self.domain.preset))?,
        };
        Ok(spec.normalized().0)
    }

    /// The billiard seen by a packet at `hbar`.
    pub fn domain(&self, hbar: f64) -> Result<BilliardDomain> {
        let spec = self.polygon()?;
        Ok(match self.domain.transform {
            Transform::None => BilliardDomain::from_polygon(&spec),
            Transform::Erode { radius } => erode(&spec, radius.unwrap_or(self.packet.sigma * (hbar / 2.0).sqrt()))?,
            Transform::Round { radius } => round_reflex_corners(&spec, radius)?,
        })
    }

    /// True when one basis serves every `hbar` of the config.
    pub fn shares_basis(&self) -> bool {
        !matches!(self.domain.transform, Transform::Erode { radius: None }) || self.hbar.len() == 1
    }

    pub fn min_hbar(&self) -> f64 {
        self.hbar.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mesh_size(&self, hbar: f64) -> f64 {
        self.spectral.h.unwrap_or(AUTO_H_PER_HBAR * hbar)
    }

    /// Requested states (per sector when `quarter`).
    pub fn state_count(&self, domain: &BilliardDomain, hbar: f64, quarter: bool) -> usize {
        self.spectral.states.unwrap_or_else(|| {
            let eps = 2.0 * AUTO_ENERGY_CUTOFF / (hbar * hbar);
            let total = weyl_count(domain.area(), domain.perimeter(), eps) / 0.8;
            let n = if quarter { total / 4.0 } else { total };
            n.ceil() as usize + 10
        })
    }

    pub fn launch(&self) -> (Vec2, Vec2) {
        let p = &self.packet;
        (Vec2::new(p.r0[0], p.r0[1]), Vec2::from_angle(p.theta))
    }

    pub fn times(&self) -> Vec<f64> {
        billiard_core::quantum::time_grid(self.time.t_max, self.time.steps)
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ExperimentConfig::from_toml("hbar = [0.05, 0.025]\n[domain]\npreset = \"triangle\"\n").unwrap();
        assert_eq!(c.hbar.len(), 2);
        assert_eq!(c.packet, PacketConfig::default());
        assert_eq!(c.domain.transform, Transform::None);
    }

    #[test]
    fn transform_is_tagged() {
        let c = ExperimentConfig::from_toml("[domain.transform]\nkind = \"round\"\nradius = 0.02\n").unwrap();
        assert_eq!(c.domain.transform, Transform::Round { radius: 0.02 });
        let d = c.domain(0.03).unwrap();
        assert!(d.segments().iter().any(|s| s.is_arc()));
    }

    #[test]
    fn unknown_preset_rejected_up_front() {
        let err = ExperimentConfig::from_toml("[domain]\npreset = \"heart\"\n").unwrap_err();
        assert!(format!("{err:#}").contains("unknown domain preset"));
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(ExperimentConfig::from_toml("hbr = [0.1]\n").is_err());
    }

    #[test]
    fn erosion_radius_follows_hbar() {
        let mut c = ExperimentConfig::default();
        c.domain.transform = Transform::Erode { radius: None };
        let a = c.domain(2f64.powi(-5)).unwrap().area();
        let b = c.domain(2f64.powi(-7)).unwrap().area();
        assert!(a < b && b < 1.0);
        c.hbar = vec![0.1, 0.05];
        assert!(!c.shares_basis());
    }

    #[test]
    fn auto_sizes() {
        let c = ExperimentConfig::default();
        let d = c.domain(1.0 / 32.0).unwrap();
        assert!((c.mesh_size(1.0 / 32.0) - 0.19 / 32.0).abs() < 1e-15);
        let full = c.state_count(&d, 1.0 / 32.0, false);
        let quarter = c.state_count(&d, 1.0 / 32.0, true);
        assert!(full > 3 * quarter && full < 5 * quarter, "{full} {quarter}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.packet.theta += 1e-9;
        assert_ne!(a.hash(), b.hash());
    }
}
