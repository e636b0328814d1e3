use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BilliardDomain, Point2, Vec2};
use crate::spectral::{EigenBasis, Mesh, QUADRANT_SIGNS};

/// Default lower bound on the captured norm.
pub const DEFAULT_NORM_THRESHOLD: f64 = 0.999;
/// Default wall clearance in units of `sigma sqrt(hbar)`.
pub const DEFAULT_WALL_MARGIN: f64 = 3.0;

/// Acceptance thresholds for a packet projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOptions {
    pub norm_threshold: f64,
    pub wall_margin: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self { norm_threshold: DEFAULT_NORM_THRESHOLD, wall_margin: DEFAULT_WALL_MARGIN }
    }
}

/// Seven-point rule, exact for quintic polynomials: barycentric points and weights.
pub(crate) const QUAD7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_770;
    const B1: f64 = 0.470_142_064_105_115;
    const W1: f64 = 0.132_394_152_788_506;
    const A2: f64 = 0.797_426_985_353_087;
    const B2: f64 = 0.101_286_507_323_456;
    const W2: f64 = 0.125_939_180_544_827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Minimal-uncertainty packet
/// `psi(r) ~ exp(-(r - r0)^2 / (2 hbar sigma^2) + i p0 . r / hbar)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePacketSpec {
    pub r0: Point2,
    pub p0: Vec2,
    pub sigma: f64,
    pub hbar: f64,
}

impl WavePacketSpec {
    pub fn new(r0: Point2, p0: Vec2, sigma: f64, hbar: f64) -> Self {
        Self { r0, p0, sigma, hbar }
    }

    /// Launch with unit momentum at angle `theta`.
    pub fn with_angle(r0: Point2, theta: f64, sigma: f64, hbar: f64) -> Self {
        Self::new(r0, Vec2::from_angle(theta), sigma, hbar)
    }

    /// Standard deviation of `|psi|^2` along each axis.
    pub fn position_std(&self) -> f64 {
        self.sigma * (self.hbar / 2.0).sqrt()
    }

    pub fn validate(&self, domain: &BilliardDomain) -> Result<()> {
        self.validate_with_margin(domain, DEFAULT_WALL_MARGIN)
    }

    /// Require the center to be `margin * sigma * sqrt(hbar)` from the walls.
    pub fn validate_with_margin(&self, domain: &BilliardDomain, margin: f64) -> Result<()> {
        if !(self.sigma > 0.0 && self.hbar > 0.0) {
            return Err(Error::InvalidArgument("sigma and hbar must be positive".into()));
        }
        if (self.p0.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("|p0| must be 1, got {}", self.p0.norm())));
        }
        let need = margin * self.sigma * self.hbar.sqrt();
        if !domain.is_interior(self.r0) || domain.distance_to_boundary(self.r0) < need {
            return Err(Error::BadInitialCondition(format!(
                "packet center ({}, {}) must lie at least {need} inside the boundary",
                self.r0.x, self.r0.y
            )));
        }
        Ok(())
    }

    /// Packet value, normalized to one over the whole plane.
    pub fn value(&self, r: Point2) -> Complex64 {
        let d = r - self.r0;
        let s2 = self.hbar * self.sigma * self.sigma;
        let amp = (PI * s2).powf(-0.5) * (-d.norm_sq() / (2.0 * s2)).exp();
        Complex64::from_polar(amp, self.p0.dot(r) / self.hbar)
    }
}

/// Packet coefficients in an eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    /// Unit-norm coefficients.
    pub coeffs: Vec<Complex64>,
    /// Norm captured by the basis before renormalization.
    pub captured_norm: f64,
}

impl SpectralState {
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("state has zero norm".into()));
        }
        let s = norm.sqrt().recip();
        Ok(Self { coeffs: coeffs.into_iter().map(|c| c * s).collect(), captured_norm: norm })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `sum |c_n|^2 E_n`.
    pub fn mean_energy(&self, energies: &[f64]) -> f64 {
        self.coeffs.iter().zip(energies).map(|(c, e)| c.norm_sqr() * e).sum()
    }

    /// First `n` coefficients, renormalized.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let mut s = Self::from_coeffs(self.coeffs[..n.min(self.len())].to_vec())?;
        s.captured_norm *= self.captured_norm;
        Ok(s)
    }
}

pub fn project_packet(spec: &WavePacketSpec, basis: &EigenBasis, domain: &BilliardDomain) -> Result<SpectralState> {
    project_packet_with(spec, basis, domain, &ProjectionOptions::default())
}

/// `c_n = integral psi_n psi_0`, evaluated per element with the exact
/// packet at quadrature points.
pub fn project_packet_with(
    spec: &WavePacketSpec,
    basis: &EigenBasis,
    domain: &BilliardDomain,
    opts: &ProjectionOptions,
) -> Result<SpectralState> {
    spec.validate_with_margin(domain, opts.wall_margin)?;
    let threshold = opts.norm_threshold;
    if (spec.hbar - basis.hbar).abs() > 1e-15 * basis.hbar {
        return Err(Error::InvalidArgument(format!(
            "packet hbar {} differs from basis hbar {}",
            spec.hbar, basis.hbar
        )));
    }
    let coeffs = match &basis.sectors {
        None => overlaps(basis, &load_vector(spec, &basis.mesh, (1.0, 1.0))),
        Some(secs) => {
            // Full state is half the parity-signed extension of the quarter vector.
            let loads: Vec<_> = QUADRANT_SIGNS.iter().map(|&s| load_vector(spec, &basis.mesh, s)).collect();
            let parts: Vec<_> = loads.iter().map(|l| overlaps(basis, l)).collect();
            (0..basis.len())
                .map(|n| {
                    QUADRANT_SIGNS.iter().zip(&parts).map(|(&(sx, sy), c)| c[n] * (0.5 * secs[n].sign(sx, sy))).sum()
                })
                .collect()
        }
    };
    let state = SpectralState::from_coeffs(coeffs)?;
    if state.captured_norm < threshold {
        return Err(Error::InsufficientBasis { captured: state.captured_norm, threshold });
    }
    Ok(state)
}

/// `integral phi_i(r) psi_0(sx x, sy y)` as real and imaginary parts.
fn load_vector(spec: &WavePacketSpec, mesh: &Mesh, (sx, sy): (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let blocks: Vec<[Complex64; 3]> = mesh
        .triangles
        .par_iter()
        .map(|t| {
            let p = t.map(|i| mesh.nodes[i]);
            let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
            let mut b = [Complex64::new(0.0, 0.0); 3];
            for (l, w) in QUAD7 {
                let r = p[0] * l[0] + p[1] * l[1] + p[2] * l[2];
                let f = spec.value(Vec2::new(sx * r.x, sy * r.y)) * (w * area);
                for k in 0..3 {
                    b[k] += f * l[k];
                }
            }
            b
        })
        .collect();
    let mut re = vec![0.0; mesh.num_nodes()];
    let mut im = vec![0.0; mesh.num_nodes()];
    for (t, b) in mesh.triangles.iter().zip(&blocks) {
        for k in 0..3 {
            re[t[k]] += b[k].re;
            im[t[k]] += b[k].im;
        }
    }
    (re, im)
}

fn overlaps(basis: &EigenBasis, (re, im): &(Vec<f64>, Vec<f64>)) -> Vec<Complex64> {
    (0..basis.len())
        .into_par_iter()
        .map(|n| {
            let v = basis.vectors.column(n);
            let (mut a, mut b) = (0.0, 0.0);
            for (i, &x) in v.iter().enumerate() {
                a += x * re[i];
                b += x * im[i];
            }
            Complex64::new(a, b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_is_exact_for_quintics() {
        // integral over the reference triangle of x^a y^b is a! b! / (a + b + 2)!.
        let fact = |n: u32| (1..=n).product::<u32>() as f64;
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 = QUAD7.iter().map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32)).sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-14, "{a} {b}");
            }
        }
    }

    #[test]
    fn packet_is_unit_normalized() {
        let s = WavePacketSpec::new(Vec2::ZERO, Vec2::new(1.0, 0.0), 0.7, 0.1);
        let v = s.value(Vec2::ZERO);
        assert!((v.norm_sqr() - 1.0 / (PI * 0.1 * 0.49)).abs() < 1e-12);
    }

    #[test]
    fn quarter_projection_matches_unfolded() {
        use crate::geometry::presets;
        use crate::spectral::symmetry_sector_solve_with;
        let d = BilliardDomain::from_polygon(&presets::centered_square(1.0));
        let b = symmetry_sector_solve_with(&d, 0.04, 12, 0.05, &Default::default()).unwrap();
        let spec = WavePacketSpec::with_angle(Vec2::new(0.12, -0.05), 0.7, 1.0, 0.05);
        let opts = ProjectionOptions { norm_threshold: 0.0, wall_margin: 1.0 };
        let q = project_packet_with(&spec, &b, &d, &opts).unwrap();
        let f = project_packet_with(&spec, &b.unfold(), &d, &opts).unwrap();
        assert!((q.captured_norm - f.captured_norm).abs() < 1e-12);
        for (a, c) in q.coeffs.iter().zip(&f.coeffs) {
            assert!((a - c).norm() < 1e-10);
        }
    }

    #[test]
    fn state_renormalizes() {
        let s = SpectralState::from_coeffs(vec![Complex64::new(0.3, 0.0), Complex64::new(0.0, 0.4)]).unwrap();
        assert!((s.captured_norm - 0.25).abs() < 1e-15);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(SpectralState::from_coeffs(vec![Complex64::new(0.0, 0.0)]).is_err());
    }
}
