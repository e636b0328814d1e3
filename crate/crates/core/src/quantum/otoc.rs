use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operators::OperatorMatrices;
use super::packet::SpectralState;
use crate::error::{Error, Result};
use crate::fit::{fit_log_growth, GrowthFit};

/// Relative floor applied to the spectrum of `M(t)` before the logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

/// Default limit on `dim^3 * times` for the operator logarithm.
pub const DEFAULT_LOG_BUDGET: f64 = 4e11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocSeries {
    pub times: Vec<f64>,
    /// `C(t) = ||[x(t), p] psi||^2`.
    pub c: Vec<f64>,
    pub l: Option<Vec<f64>>,
    pub hbar: f64,
    pub n_states: usize,
    pub captured_norm: f64,
    /// Largest deviation of the evolved norm from its initial value.
    pub unitarity_error: f64,
}

impl OtocSeries {
    pub fn c_over_hbar2(&self) -> Vec<f64> {
        let h2 = self.hbar * self.hbar;
        self.c.iter().map(|c| c / h2).collect()
    }

    pub fn ln_c_over_hbar2(&self) -> Vec<f64> {
        self.c_over_hbar2().iter().map(|c| c.ln()).collect()
    }
}

fn check_dims(times: &[f64], ops: &OperatorMatrices, energies: &[f64], state: &SpectralState) -> Result<usize> {
    let n = ops.dim();
    if energies.len() != n || state.len() != n {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {n} operators, {} energies, {} coefficients",
            energies.len(),
            state.len()
        )));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("non-finite time".into()));
    }
    Ok(n)
}

/// Real and imaginary parts as an `n x 2` matrix.
fn split(v: &[Complex64]) -> DMatrix<f64> {
    DMatrix::from_fn(v.len(), 2, |i, k| if k == 0 { v[i].re } else { v[i].im })
}

fn join(m: &DMatrix<f64>) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| Complex64::new(m[(i, 0)], m[(i, 1)])).collect()
}

/// `i * pf * v`.
fn apply_p(pf: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    join(&(pf * split(v))).into_iter().map(|z| Complex64::i() * z).collect()
}

/// `x(t) v = D X D^* v` with `D = diag(exp(i E_n t / hbar))`.
fn apply_xt(x: &DMatrix<f64>, phases: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let rotated: Vec<Complex64> = v.iter().zip(phases).map(|(a, p)| a * p.conj()).collect();
    join(&(x * split(&rotated))).into_iter().zip(phases).map(|(a, p)| a * p).collect()
}

fn phases(energies: &[f64], t: f64, hbar: f64) -> Vec<Complex64> {
    energies.iter().map(|e| Complex64::from_polar(1.0, e * t / hbar)).collect()
}

/// `C(t) = -<[x(t), p]^2>` on a time grid.
pub fn otoc(
    times: &[f64],
    ops: &OperatorMatrices,
    energies: &[f64],
    state: &SpectralState,
    hbar: f64,
) -> Result<OtocSeries> {
    check_dims(times, ops, energies, state)?;
    let psi = &state.coeffs;
    let p_psi = apply_p(&ops.p_factor, psi);
    let norm0 = state.norm_sqr();
    let rows: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let ph = phases(energies, t, hbar);
            let evolved: f64 = psi.iter().zip(&ph).map(|(c, p)| (c * p.conj()).norm_sqr()).sum();
            let a = apply_xt(&ops.x, &ph, &p_psi);
            let b = apply_p(&ops.p_factor, &apply_xt(&ops.x, &ph, psi));
            let c: f64 = a.iter().zip(&b).map(|(u, v)| (u - v).norm_sqr()).sum();
            (c, (evolved - norm0).abs())
        })
        .collect();
    Ok(OtocSeries {
        times: times.to_vec(),
        c: rows.iter().map(|r| r.0).collect(),
        l: None,
        hbar,
        n_states: ops.dim(),
        captured_norm: state.captured_norm,
        unitarity_error: rows.iter().fold(0.0, |m, r| m.max(r.1)),
    })
}

/// Hermitian `i [x(t), p] / hbar`, as real and imaginary parts.
fn scaled_commutator(ops: &OperatorMatrices, energies: &[f64], t: f64, hbar: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ops.dim();
    let theta: Vec<f64> = energies.iter().map(|e| e * t / hbar).collect();
    let xc = DMatrix::from_fn(n, n, |i, j| ops.x[(i, j)] * (theta[i] - theta[j]).cos());
    let xs = DMatrix::from_fn(n, n, |i, j| ops.x[(i, j)] * (theta[i] - theta[j]).sin());
    // With p = i pf: i [x, p] = pf x - x pf, and x pf = -(pf x)^T for the
    // symmetric part, +(pf x)^T for the antisymmetric part.
    let a = &ops.p_factor * xc;
    let b = &ops.p_factor * xs;
    ((&a + a.transpose()) / hbar, (&b - b.transpose()) / hbar)
}

/// `<psi| ln M(t) |psi>` for one time.
fn log_expectation(re: &DMatrix<f64>, im: &DMatrix<f64>, psi: &[Complex64]) -> f64 {
    let n = re.nrows();
    // Real symmetric embedding of the Hermitian matrix; each eigenvalue
    // appears twice, with eigenvectors (u_r, u_i) and (-u_i, u_r).
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(re);
    big.view_mut((n, n), (n, n)).copy_from(re);
    big.view_mut((n, 0), (n, n)).copy_from(im);
    big.view_mut((0, n), (n, n)).copy_from(&(-im));
    let eig = SymmetricEigen::new(big);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v * v));
    let floor = (LOG_FLOOR * max).max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    for k in 0..2 * n {
        let u = eig.eigenvectors.column(k);
        let mu = eig.eigenvalues[k];
        // |<u|psi>|^2 for u = u_r + i u_i, embedded as (u_r, u_i).
        let (mut zr, mut zi) = (0.0, 0.0);
        for i in 0..n {
            let (ur, ui) = (u[i], u[n + i]);
            zr += ur * psi[i].re + ui * psi[i].im;
            zi += ur * psi[i].im - ui * psi[i].re;
        }
        // Each Hermitian eigenvector is counted twice in the embedding.
        total += 0.5 * (zr * zr + zi * zi) * (mu * mu).max(floor).ln();
    }
    total
}

/// `L(t) = <ln(-[x(t), p]^2 / hbar^2)>` with [`DEFAULT_LOG_BUDGET`].
pub fn log_otoc(
    times: &[f64],
    ops: &OperatorMatrices,
    energies: &[f64],
    state: &SpectralState,
    hbar: f64,
) -> Result<Vec<f64>> {
    log_otoc_with(times, ops, energies, state, hbar, DEFAULT_LOG_BUDGET)
}

pub fn log_otoc_with(
    times: &[f64],
    ops: &OperatorMatrices,
    energies: &[f64],
    state: &SpectralState,
    hbar: f64,
    budget: f64,
) -> Result<Vec<f64>> {
    let n = check_dims(times, ops, energies, state)?;
    if (n as f64).powi(3) * times.len() as f64 > budget {
        return Err(Error::TooLarge { dim: n, times: times.len() });
    }
    Ok(times
        .par_iter()
        .map(|&t| {
            let (re, im) = scaled_commutator(ops, energies, t, hbar);
            log_expectation(&re, &im, &state.coeffs)
        })
        .collect())
}

/// Fraction of the peak of `ln(C / hbar^2)` that closes the default window.
pub const DEFAULT_SATURATION_FRACTION: f64 = 0.9;

/// Window from `t_start` to the first sample at or after it where
/// `ln(C / hbar^2)` reaches `fraction` of its maximum over the series.
pub fn saturation_window(series: &OtocSeries, t_start: f64, fraction: f64) -> Result<(f64, f64)> {
    let lc = series.ln_c_over_hbar2();
    let peak = lc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Fit(format!("ln(C / hbar^2) never exceeds zero (peak {peak})")));
    }
    series
        .times
        .iter()
        .zip(&lc)
        .find(|(&t, &l)| t > t_start && l >= fraction * peak)
        .map(|(&t, _)| (t_start, t))
        .ok_or_else(|| Error::Fit(format!("no sample after t = {t_start} reaches {fraction} of the peak")))
}

/// Fit `ln(C / hbar^2)` on a window.
pub fn fit_otoc_growth(series: &OtocSeries, window: (f64, f64)) -> Result<GrowthFit> {
    if let Some((t, c)) =
        series.times.iter().zip(&series.c).find(|(&t, &c)| t >= window.0 && t <= window.1 && !(c > 0.0))
    {
        return Err(Error::Fit(format!("non-positive C = {c} at t = {t}")));
    }
    fit_log_growth(&series.times, &series.ln_c_over_hbar2(), window)
}

/// `t_E = ln(1 / hbar) / lambda`.
pub fn ehrenfest_time(hbar: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::NonChaotic(lambda));
    }
    if !(hbar > 0.0) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
    }
    Ok((1.0 / hbar).ln() / lambda)
}

/// `n` uniform points on `[0, t_max]`.
pub fn time_grid(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

/// Effect of dropping the top tenth of the states on `ln C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    /// Largest `|ln C_full - ln C_reduced|` over the window.
    pub max_log_change: f64,
    pub kept: usize,
    pub robust: bool,
}

/// Tolerated change of `ln C` when the top tenth of the states is dropped.
pub const TRUNCATION_TOL: f64 = 0.05;

pub fn truncation_robustness(
    times: &[f64],
    ops: &OperatorMatrices,
    energies: &[f64],
    state: &SpectralState,
    hbar: f64,
    window: (f64, f64),
) -> Result<TruncationCheck> {
    let full = otoc(times, ops, energies, state, hbar)?;
    let kept = ops.dim() - ops.dim() / 10;
    let reduced = otoc(times, &ops.truncated(kept), &energies[..kept], &state.truncated(kept)?, hbar)?;
    let max_log_change = times
        .iter()
        .zip(full.c.iter().zip(&reduced.c))
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(_, (a, b))| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max);
    Ok(TruncationCheck { max_log_change, kept, robust: max_log_change < TRUNCATION_TOL })
}
