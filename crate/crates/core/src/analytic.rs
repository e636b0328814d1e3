//! Closed-form eigenbases of the 1D box and the rectangle.
//!
//! Modes are `sqrt(2/a) sin(n pi x / a)` on `[0, a]`, indexed from `n = 1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{otoc, OperatorMatrices, OtocSeries, SpectralState, DEFAULT_NORM_THRESHOLD};
use crate::spectral::Mesh;

/// Particle in a box `[0, a]` with a Gaussian packet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec1D {
    pub length: f64,
    pub hbar: f64,
    pub x0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub modes: usize,
}

impl BoxSpec1D {
    pub fn validate(&self) -> Result<()> {
        if self.modes < 2 {
            return Err(Error::InvalidArgument("box basis needs at least 2 modes".into()));
        }
        if !(self.length > 0.0 && self.hbar > 0.0 && self.sigma > 0.0) {
            return Err(Error::InvalidArgument("length, hbar and sigma must be positive".into()));
        }
        let margin = 3.0 * self.sigma * self.hbar.sqrt();
        if self.x0 < margin || self.x0 > self.length - margin {
            return Err(Error::BadInitialCondition(format!(
                "x0 = {} must lie at least {margin} inside [0, {}]",
                self.x0, self.length
            )));
        }
        Ok(())
    }
}

/// `E_n = hbar^2 pi^2 n^2 / (2 a^2)` for `n = 1..=modes`.
pub fn box_energies(length: f64, hbar: f64, modes: usize) -> Vec<f64> {
    (1..=modes).map(|n| (hbar * PI * n as f64 / length).powi(2) / 2.0).collect()
}

/// `<n| x |m>` in the box.
pub fn box_x_element(length: f64, n: usize, m: usize) -> f64 {
    if n == m {
        return length / 2.0;
    }
    if (n + m) % 2 == 0 {
        return 0.0;
    }
    let (n, m) = (n as f64, m as f64);
    -8.0 * n * m * length / (PI * PI * (n * n - m * m).powi(2))
}

pub fn box_x_matrix(length: f64, modes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(modes, modes, |i, j| box_x_element(length, i + 1, j + 1))
}

#[derive(Clone, Debug)]
pub struct BoxBasis {
    pub energies: Vec<f64>,
    pub x: DMatrix<f64>,
}

pub fn box_basis(spec: &BoxSpec1D) -> Result<BoxBasis> {
    if spec.modes < 2 {
        return Err(Error::InvalidArgument("box basis needs at least 2 modes".into()));
    }
    Ok(BoxBasis {
        energies: box_energies(spec.length, spec.hbar, spec.modes),
        x: box_x_matrix(spec.length, spec.modes),
    })
}

/// Overlap of `sqrt(2/a) sin(k x)` with a unit 1D packet, integrated over the
/// whole line. The tails outside the box are below `exp(-9/2)` in amplitude
/// for packets that pass [`BoxSpec1D::validate`].
fn sine_packet_overlap(length: f64, n: usize, x0: f64, p0: f64, sigma: f64, hbar: f64) -> Complex64 {
    let s2 = hbar * sigma * sigma;
    let k = PI * n as f64 / length;
    let q0 = p0 / hbar;
    // integral exp(i q x) exp(-(x - x0)^2 / (2 s^2)) dx
    let gauss = |q: f64| Complex64::from_polar((2.0 * PI * s2).sqrt() * (-q * q * s2 / 2.0).exp(), q * x0);
    let amp = (2.0 / length).sqrt() * (PI * s2).powf(-0.25);
    (gauss(q0 + k) - gauss(q0 - k)) * amp / Complex64::new(0.0, 2.0)
}

/// Packet coefficients in the box basis.
pub fn box_packet(spec: &BoxSpec1D) -> Result<SpectralState> {
    spec.validate()?;
    let coeffs = (1..=spec.modes)
        .map(|n| sine_packet_overlap(spec.length, n, spec.x0, spec.p0, spec.sigma, spec.hbar))
        .collect();
    SpectralState::from_coeffs(coeffs)
}

/// Time after which every box phase returns to one.
pub fn revival_time(length: f64, hbar: f64) -> f64 {
    4.0 * length * length / (PI * hbar)
}

/// OTOC of the box packet, computed by the generic engine.
pub fn box_otoc(spec: &BoxSpec1D, times: &[f64]) -> Result<OtocSeries> {
    let basis = box_basis(spec)?;
    let state = box_packet(spec)?;
    if state.captured_norm < DEFAULT_NORM_THRESHOLD {
        return Err(Error::InsufficientBasis { captured: state.captured_norm, threshold: DEFAULT_NORM_THRESHOLD });
    }
    let ops = OperatorMatrices::from_x(basis.x, &basis.energies, spec.hbar);
    otoc(times, &ops, &basis.energies, &state, spec.hbar)
}

/// Rectangle `[0, a] x [0, b]` with modes up to `nx` and `ny` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleSpec {
    pub a: f64,
    pub b: f64,
    pub nx: usize,
    pub ny: usize,
}

impl RectangleSpec {
    /// Unit-area rectangle with aspect ratio `a / b`.
    pub fn unit_area(aspect: f64, nx: usize, ny: usize) -> Self {
        let a = aspect.sqrt();
        Self { a, b: 1.0 / a, nx, ny }
    }
}

/// Product sine modes sorted by energy.
#[derive(Clone, Debug)]
pub struct RectangleBasis {
    pub spec: RectangleSpec,
    pub hbar: f64,
    /// Quantum numbers `(n, m)`, both starting at 1.
    pub modes: Vec<(usize, usize)>,
    pub energies: Vec<f64>,
}

pub fn rectangle_basis(spec: &RectangleSpec, hbar: f64) -> Result<RectangleBasis> {
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::InvalidArgument("rectangle needs at least one mode per axis".into()));
    }
    if !(spec.a > 0.0 && spec.b > 0.0) {
        return Err(Error::InvalidArgument("rectangle sides must be positive".into()));
    }
    let level = |(n, m): (usize, usize)| PI * PI * ((n as f64 / spec.a).powi(2) + (m as f64 / spec.b).powi(2));
    let mut modes: Vec<(usize, usize)> = (1..=spec.nx).flat_map(|n| (1..=spec.ny).map(move |m| (n, m))).collect();
    modes.sort_by(|&p, &q| level(p).total_cmp(&level(q)).then(p.cmp(&q)));
    let energies = modes.iter().map(|&p| hbar * hbar * level(p) / 2.0).collect();
    Ok(RectangleBasis { spec: *spec, hbar, modes, energies })
}

impl RectangleBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Levels `2 E / hbar^2`.
    pub fn levels(&self) -> Vec<f64> {
        let h2 = self.hbar * self.hbar;
        self.energies.iter().map(|e| 2.0 * e / h2).collect()
    }

    /// Number of modes with `2 E / hbar^2 <= eps`.
    pub fn count_below(&self, eps: f64) -> usize {
        self.levels().iter().filter(|&&l| l <= eps).count()
    }

    pub fn value(&self, k: usize, x: f64, y: f64) -> f64 {
        let (n, m) = self.modes[k];
        let RectangleSpec { a, b, .. } = self.spec;
        2.0 / (a * b).sqrt() * (PI * n as f64 * x / a).sin() * (PI * m as f64 * y / b).sin()
    }

    /// Modes sampled at the mesh nodes, one column per mode.
    pub fn sample(&self, mesh: &Mesh) -> DMatrix<f64> {
        DMatrix::from_fn(mesh.num_nodes(), self.len(), |i, k| self.value(k, mesh.nodes[i].x, mesh.nodes[i].y))
    }

    /// `<nm| x |n'm'> = x_{nn'} delta_{mm'}`.
    pub fn x_matrix(&self) -> DMatrix<f64> {
        let k = self.len();
        DMatrix::from_fn(k, k, |i, j| {
            let (n, m) = self.modes[i];
            let (n2, m2) = self.modes[j];
            if m == m2 {
                box_x_element(self.spec.a, n, n2)
            } else {
                0.0
            }
        })
    }

    /// Coefficients of the 2D packet `psi(r) ~ exp(-(r - r0)^2 / (2 hbar sigma^2) + i p0 . r / hbar)`.
    pub fn packet(&self, r0: (f64, f64), p0: (f64, f64), sigma: f64) -> Result<SpectralState> {
        let s = &self.spec;
        let coeffs = self
            .modes
            .iter()
            .map(|&(n, m)| {
                sine_packet_overlap(s.a, n, r0.0, p0.0, sigma, self.hbar)
                    * sine_packet_overlap(s.b, m, r0.1, p0.1, sigma, self.hbar)
            })
            .collect();
        SpectralState::from_coeffs(coeffs)
    }

    pub fn operators(&self) -> OperatorMatrices {
        OperatorMatrices::from_x(self.x_matrix(), &self.energies, self.hbar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn x12_matches_quadrature() {
        let q = simpson(|x| 2.0 * x * (PI * x).sin() * (2.0 * PI * x).sin(), 0.0, 1.0, 2000);
        assert!((box_x_element(1.0, 1, 2) - q).abs() < 1e-12);
        assert!((box_x_element(1.0, 1, 2) + 0.18013).abs() < 1e-5);
        assert_eq!(box_x_element(1.0, 1, 3), 0.0);
    }

    #[test]
    fn x_elements_match_quadrature_on_scaled_box() {
        let a = 1.7;
        for (n, m) in [(1, 1), (2, 5), (3, 4), (2, 4), (6, 1)] {
            let q =
                simpson(|x| 2.0 / a * x * (PI * n as f64 * x / a).sin() * (PI * m as f64 * x / a).sin(), 0.0, a, 4000);
            assert!((box_x_element(a, n, m) - q).abs() < 1e-10, "{n} {m}");
        }
    }

    #[test]
    fn energy_ratio() {
        let e = box_energies(1.0, 0.3, 3);
        assert!((e[1] / e[0] - 4.0).abs() < 1e-14);
        assert!((e[0] - 0.09 * PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn packet_overlap_matches_quadrature() {
        let (hbar, sigma, x0, p0) = (0.01, 1.0 / 2f64.sqrt(), 0.5, 1.0);
        let s2 = hbar * sigma * sigma;
        let norm = (PI * s2).powf(-0.25);
        for n in [1, 10, 16, 25] {
            let k = PI * n as f64;
            let f = |x: f64, im: bool| {
                let g = norm * (-(x - x0).powi(2) / (2.0 * s2)).exp() * 2f64.sqrt() * (k * x).sin();
                if im {
                    g * (p0 * x / hbar).sin()
                } else {
                    g * (p0 * x / hbar).cos()
                }
            };
            let re = simpson(|x| f(x, false), 0.0, 1.0, 20000);
            let im = simpson(|x| f(x, true), 0.0, 1.0, 20000);
            let c = sine_packet_overlap(1.0, n, x0, p0, sigma, hbar);
            assert!((c - Complex64::new(re, im)).norm() < 1e-9, "{n}: {c} vs {re} {im}");
        }
    }

    #[test]
    fn rectangle_counts_and_ordering() {
        let r = rectangle_basis(&RectangleSpec { a: 1.0, b: 1.0, nx: 40, ny: 40 }, 1.0).unwrap();
        assert_eq!(r.count_below(1000.0), 71);
        assert!(r.energies.windows(2).all(|w| w[0] <= w[1]));
        assert!((r.energies[0] - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn rectangle_x_is_separable() {
        let r = rectangle_basis(&RectangleSpec::unit_area(2.0, 6, 6), 0.1).unwrap();
        let x = r.x_matrix();
        assert_eq!(x, x.transpose());
        for (i, &(n, m)) in r.modes.iter().enumerate() {
            for (j, &(n2, m2)) in r.modes.iter().enumerate() {
                let expect = if m == m2 { box_x_element(r.spec.a, n, n2) } else { 0.0 };
                assert_eq!(x[(i, j)], expect);
            }
        }
    }

    fn box_spec() -> BoxSpec1D {
        BoxSpec1D { length: 1.0, hbar: 0.02, x0: 0.4, p0: 1.0, sigma: 1.0 / 2f64.sqrt(), modes: 80 }
    }

    #[test]
    fn box_otoc_revives() {
        let s = box_spec();
        let tr = revival_time(s.length, s.hbar);
        let c = box_otoc(&s, &[0.0, 0.3 * tr, tr]).unwrap().c;
        assert!((c[2] - c[0]).abs() / c[0] < 1e-6);
        assert!((c[0] / (s.hbar * s.hbar) - 1.0).abs() < 0.02, "{}", c[0]);
        // Reversal about the revival flips the launch momentum.
        let back = box_otoc(&BoxSpec1D { p0: -s.p0, ..s }, &[0.7 * tr]).unwrap().c;
        assert!((back[0] - c[1]).abs() / c[1] < 1e-6);
    }

    #[test]
    fn centered_box_otoc_is_symmetric_about_revival() {
        let s = BoxSpec1D { x0: 0.5, ..box_spec() };
        let tr = revival_time(s.length, s.hbar);
        for f in [0.1, 0.25, 0.4] {
            let c = box_otoc(&s, &[f * tr, (1.0 - f) * tr]).unwrap().c;
            assert!((c[0] - c[1]).abs() / c[0] < 1e-6, "{f}");
        }
    }

    #[test]
    fn box_otoc_has_growth_intervals() {
        let s = box_spec();
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.01).collect();
        let c = box_otoc(&s, &times).unwrap().c;
        let ups = c.windows(2).filter(|w| w[1] > w[0]).count();
        let downs = c.windows(2).filter(|w| w[1] < w[0]).count();
        assert!(ups > 20 && downs > 20, "{ups} up, {downs} down");
    }

    #[test]
    fn box_spec_rejects_wall_packet() {
        let s = BoxSpec1D { length: 1.0, hbar: 0.01, x0: 0.05, p0: 1.0, sigma: 1.0, modes: 50 };
        assert!(box_packet(&s).is_err());
        assert!(box_basis(&BoxSpec1D { modes: 1, ..s }).is_err());
    }
}
