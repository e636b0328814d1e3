//! The `solve`, `classical`, `otoc` and `sweep` commands.

use std::path::Path;

use anyhow::Result;
use billiard_core::analytic::{rectangle_basis, RectangleSpec};
use billiard_core::quantum::{otoc, SpectralState};
use billiard_core::spectral::{count_at, Sector};
use serde::Serialize;
use serde_json::json;

use crate::cache::BasisCache;
use crate::config::{ExperimentConfig, Transform};
use crate::output::{OutputDir, RunManifest};
use crate::pipeline::{
    classical_stage, quantum_stage, require_sweep, solve_all, ClassicalRun, QuantumRun, SolvedBasis,
};

/// Built-in parameters echoed into every manifest.
pub fn parameters() -> serde_json::Value {
    use billiard_core::{classical as cl, geometry as geo, quantum as q, spectral as sp};
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "eps_geo": geo::EPS_GEO,
        "min_mesh_angle_deg": sp::MIN_ANGLE_DEG,
        "orthonormality_tol": sp::ORTHONORMALITY_TOL,
        "residual_tol": sp::RESIDUAL_TOL,
        "reliable_fraction": 0.8,
        "basis_container_version": sp::CONTAINER_VERSION,
        "norm_threshold_default": q::DEFAULT_NORM_THRESHOLD,
        "log_floor": q::LOG_FLOOR,
        "log_budget": q::DEFAULT_LOG_BUDGET,
        "truncation_tol": q::TRUNCATION_TOL,
        "truncation_dropped_fraction": 0.1,
        "saturation_fraction_default": q::DEFAULT_SATURATION_FRACTION,
        "fit_validity": "rate >= 5 / window length",
        "min_fit_samples": billiard_core::fit::MIN_FIT_SAMPLES,
        "delta0_default": cl::DEFAULT_DELTA0,
        "max_invalid_fraction": cl::MAX_INVALID_FRACTION,
        "auto_h_per_hbar": crate::config::AUTO_H_PER_HBAR,
        "auto_energy_cutoff": crate::config::AUTO_ENERGY_CUTOFF,
    })
}

fn finish(out: OutputDir, command: &str, cfg: &ExperimentConfig) -> Result<RunManifest> {
    out.finish(command, cfg.hash(), serde_json::to_value(cfg)?, parameters())
}

/// Directory prefix for one `hbar` of a multi-valued run.
fn hbar_dir(cfg: &ExperimentConfig, hbar: f64) -> String {
    if cfg.hbar.len() == 1 {
        String::new()
    } else {
        format!("hbar_{hbar}/")
    }
}

fn write_spectrum(out: &mut OutputDir, prefix: &str, s: &SolvedBasis) -> Result<()> {
    let n: Vec<f64> = (0..s.basis.len()).map(|i| i as f64).collect();
    let sector: Vec<f64> =
        (0..s.basis.len()).map(|i| s.basis.sector(i).map_or(-1.0, |c: Sector| c.code() as f64)).collect();
    out.write_csv(&format!("{prefix}spectrum.csv"), &["n", "eps", "sector"], &[&n, &s.basis.lambdas, &sector])?;
    let counted: Vec<f64> = s.weyl.counted.iter().map(|&c| c as f64).collect();
    out.write_csv(&format!("{prefix}weyl.csv"), &["eps", "count", "weyl"], &[&s.weyl.eps, &counted, &s.weyl.weyl])?;
    out.write_text(&format!("{prefix}domain.txt"), &s.domain.to_text())?;
    out.write_json(&format!("{prefix}solve.json"), &s.summary())?;
    out.check(
        format!("{prefix}hygiene"),
        s.hygiene.passes(),
        format!(
            "{} states, orthonormality {:.1e}, residual {:.1e}",
            s.hygiene.states, s.hygiene.max_orthonormality_error, s.hygiene.max_relative_residual
        ),
    );
    out.check(
        format!("{prefix}weyl"),
        !s.weyl.flagged,
        format!("max deviation {:.3} within band {:.3}", s.weyl.max_deviation, s.weyl.band),
    );
    Ok(())
}

fn write_quantum(out: &mut OutputDir, prefix: &str, q: &QuantumRun) -> Result<()> {
    let s = &q.series;
    let c2 = s.c_over_hbar2();
    out.write_csv(
        &format!("{prefix}C.csv"),
        &["t", "C", "C_over_hbar2", "ln_C_over_hbar2"],
        &[&s.times, &s.c, &c2, &q.ln_c_over_hbar2()],
    )?;
    if !q.l.is_empty() {
        out.write_csv(&format!("{prefix}L.csv"), &["t", "L"], &[&q.l_times, &q.l])?;
    }
    Ok(())
}

fn write_classical(out: &mut OutputDir, prefix: &str, c: &ClassicalRun) -> Result<()> {
    let s = &c.series;
    out.write_csv(
        &format!("{prefix}C_cl.csv"),
        &["t", "C_cl", "C_cl_stderr", "L_cl", "L_cl_stderr"],
        &[&s.times, &s.c_cl, &s.c_cl_stderr, &s.l_cl, &s.l_cl_stderr],
    )
}

#[derive(Serialize)]
struct FitRecord<'a> {
    hbar: f64,
    quantum: Option<QuantumFit<'a>>,
    classical: Option<ClassicalFit<'a>>,
}

#[derive(Serialize)]
struct QuantumFit<'a> {
    states: usize,
    launches: usize,
    captured_norm: f64,
    c0_over_hbar2: f64,
    unitarity_error: f64,
    p_consistency: &'a billiard_core::quantum::PConsistency,
    t_first_collision: f64,
    window: Option<(f64, f64)>,
    fit: Option<&'a billiard_core::fit::GrowthFit>,
    fit_error: Option<&'a str>,
    truncation: Option<&'a billiard_core::quantum::TruncationCheck>,
}

#[derive(Serialize)]
struct ClassicalFit<'a> {
    samples: usize,
    invalid_samples: usize,
    window: (f64, f64),
    fit: Option<&'a billiard_core::fit::GrowthFit>,
    fit_error: Option<&'a str>,
    lambda_cl: Option<f64>,
    t_ehrenfest: Option<f64>,
    lyapunov: Option<&'a billiard_core::classical::LyapunovEstimate>,
}

fn quantum_fit(q: &QuantumRun) -> QuantumFit<'_> {
    QuantumFit {
        states: q.series.n_states,
        launches: q.launches,
        captured_norm: q.series.captured_norm,
        c0_over_hbar2: q.c0_over_hbar2,
        unitarity_error: q.series.unitarity_error,
        p_consistency: &q.p_consistency,
        t_first_collision: q.t_first_collision,
        window: q.window,
        fit: q.fit.as_ref(),
        fit_error: q.fit_error.as_deref(),
        truncation: q.truncation.as_ref(),
    }
}

fn classical_fit(c: &ClassicalRun) -> ClassicalFit<'_> {
    ClassicalFit {
        samples: c.series.valid_samples,
        invalid_samples: c.series.invalid_samples,
        window: c.window,
        fit: c.fit.as_ref(),
        fit_error: c.fit_error.as_deref(),
        lambda_cl: c.lambda_cl,
        t_ehrenfest: c.t_ehrenfest,
        lyapunov: c.lyapunov.as_ref(),
    }
}

/// `solve`: spectrum, Weyl comparison and hygiene.
pub fn run_solve(cfg: &ExperimentConfig, dir: &Path, cache: &BasisCache) -> Result<RunManifest> {
    let mut out = OutputDir::create(dir)?;
    out.write_text("config.toml", &cfg.to_toml())?;
    let solved = out.timed("spectral", |_| solve_all(cfg, cache))?;
    let mut done = Vec::new();
    for (hbar, s) in &solved {
        if done.iter().any(|p| std::rc::Rc::ptr_eq(p, s)) {
            continue;
        }
        let prefix = if cfg.shares_basis() { String::new() } else { hbar_dir(cfg, *hbar) };
        write_spectrum(&mut out, &prefix, s)?;
        done.push(s.clone());
    }
    finish(out, "solve", cfg)
}

/// `classical`: ensemble OTOC, growth fit and optional Lyapunov exponent.
pub fn run_classical(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    let mut out = OutputDir::create(dir)?;
    out.write_text("config.toml", &cfg.to_toml())?;
    let mut fits = Vec::new();
    for &hbar in &cfg.hbar {
        let domain = cfg.domain(hbar)?;
        let c = out.timed(&format!("classical hbar={hbar}"), |_| classical_stage(cfg, &domain, hbar))?;
        write_classical(&mut out, &hbar_dir(cfg, hbar), &c)?;
        fits.push((hbar, c));
    }
    let records: Vec<FitRecord> =
        fits.iter().map(|(h, c)| FitRecord { hbar: *h, quantum: None, classical: Some(classical_fit(c)) }).collect();
    out.write_json("fits.json", &records)?;
    finish(out, "classical", cfg)
}

/// Everything the `otoc` and `sweep` commands compute.
pub struct OtocResults {
    pub quantum: Vec<QuantumRun>,
    pub classical: Vec<Option<ClassicalRun>>,
    pub manifest: RunManifest,
}

/// `otoc`: quantum (and classical, if enabled) OTOC for every `hbar`.
pub fn run_otoc(cfg: &ExperimentConfig, dir: &Path, cache: &BasisCache) -> Result<OtocResults> {
    run_otoc_named(cfg, dir, cache, "otoc")
}

fn run_otoc_named(cfg: &ExperimentConfig, dir: &Path, cache: &BasisCache, command: &str) -> Result<OtocResults> {
    let mut out = OutputDir::create(dir)?;
    out.write_text("config.toml", &cfg.to_toml())?;
    let solved = out.timed("spectral", |_| solve_all(cfg, cache))?;
    let mut quantum = Vec::new();
    let mut classical = Vec::new();
    let mut written: Vec<std::rc::Rc<SolvedBasis>> = Vec::new();
    for (hbar, s) in &solved {
        let prefix = hbar_dir(cfg, *hbar);
        if !written.iter().any(|p| std::rc::Rc::ptr_eq(p, s)) {
            let sp = if cfg.shares_basis() { String::new() } else { prefix.clone() };
            write_spectrum(&mut out, &sp, s)?;
            written.push(s.clone());
        }
        let q = out.timed(&format!("quantum hbar={hbar}"), |_| quantum_stage(cfg, s, *hbar))?;
        write_quantum(&mut out, &prefix, &q)?;
        out.check(
            format!("{prefix}c0"),
            (q.c0_over_hbar2 - 1.0).abs() <= 0.02 || q.series.captured_norm < 0.999,
            format!("C(0)/hbar^2 = {:.5}, captured {:.6}", q.c0_over_hbar2, q.series.captured_norm),
        );
        let c = if cfg.classical.enabled {
            let c = out.timed(&format!("classical hbar={hbar}"), |_| classical_stage(cfg, &s.domain, *hbar))?;
            write_classical(&mut out, &prefix, &c)?;
            Some(c)
        } else {
            None
        };
        if is_reference_square(cfg) {
            out.timed(&format!("reference hbar={hbar}"), |o| reference_checks(o, &prefix, cfg, s, &q, c.as_ref()))?;
        }
        quantum.push(q);
        classical.push(c);
    }
    let records: Vec<FitRecord> = quantum
        .iter()
        .zip(&classical)
        .map(|(q, c)| FitRecord {
            hbar: q.hbar,
            quantum: Some(quantum_fit(q)),
            classical: c.as_ref().map(classical_fit),
        })
        .collect();
    out.write_json("fits.json", &records)?;
    if command == "sweep" {
        let h: Vec<f64> = quantum.iter().map(|q| q.hbar).collect();
        let field = |f: &dyn Fn(&QuantumRun) -> Option<f64>| -> Vec<f64> {
            quantum.iter().map(|q| f(q).unwrap_or(f64::NAN)).collect()
        };
        let rate = field(&|q| q.fit.map(|f| f.rate));
        let err = field(&|q| q.fit.map(|f| f.rate_stderr));
        let ta = field(&|q| q.window.map(|w| w.0));
        let tb = field(&|q| q.window.map(|w| w.1));
        let valid = field(&|q| q.fit.map(|f| f64::from(u8::from(f.valid))));
        out.write_csv(
            "rates.csv",
            &["hbar", "rate", "rate_stderr", "window_start", "window_end", "valid"],
            &[&h, &rate, &err, &ta, &tb, &valid],
        )?;
    }
    let manifest = finish(out, command, cfg)?;
    Ok(OtocResults { quantum, classical, manifest })
}

/// `sweep`: [`run_otoc`] over at least two `hbar` values plus a rate table.
pub fn run_sweep(cfg: &ExperimentConfig, dir: &Path, cache: &BasisCache) -> Result<OtocResults> {
    require_sweep(cfg)?;
    run_otoc_named(cfg, dir, cache, "sweep")
}

fn is_reference_square(cfg: &ExperimentConfig) -> bool {
    cfg.domain.vertices.is_none() && cfg.domain.preset == "unit-square" && cfg.domain.transform == Transform::None
}

/// Relative width of level gaps the count check treats as resolved.
const RESOLVED_GAP: f64 = 0.02;

/// FEM against the separable unit-square solution.
fn reference_checks(
    out: &mut OutputDir,
    prefix: &str,
    cfg: &ExperimentConfig,
    s: &SolvedBasis,
    q: &QuantumRun,
    c: Option<&ClassicalRun>,
) -> Result<()> {
    let hbar = q.hbar;
    let exact = rectangle_basis(&RectangleSpec { a: 1.0, b: 1.0, nx: 40, ny: 40 }, hbar)?;
    let eps = exact.levels();
    let worst = s.basis.lambdas.iter().take(20).zip(&eps).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    out.check(format!("{prefix}reference eigenvalues"), worst < 0.005, format!("first 20 within {worst:.2e}"));
    let cutoff = eps[s.ops.dim().min(eps.len()) - 1];
    let mismatched = eps
        .windows(2)
        .filter(|w| w[1] > w[0] * (1.0 + RESOLVED_GAP) && w[1] < cutoff)
        .map(|w| 0.5 * (w[0] + w[1]))
        .filter(|&m| count_at(&s.basis.lambdas, m) != count_at(&eps, m))
        .count();
    out.check(
        format!("{prefix}reference counts"),
        mismatched == 0,
        format!("{mismatched} counts differ at the midpoints of gaps wider than {RESOLVED_GAP}"),
    );

    let (r0, p0) = cfg.launch();
    // Same number of states on both sides.
    let n = s.ops.dim().min(exact.len());
    let full = exact.packet((r0.x, r0.y), (p0.x, p0.y), cfg.packet.sigma)?;
    let state = SpectralState::from_coeffs(full.coeffs[..n].to_vec())?;
    let series = otoc(&q.series.times, &exact.operators().truncated(n), &exact.energies[..n], &state, hbar)?;
    let worst = q.series.c.iter().zip(&series.c).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    out.check(
        format!("{prefix}reference otoc"),
        worst < 0.05,
        format!("C(t) within {worst:.3e} of the analytic series"),
    );
    let ln_exact = series.ln_c_over_hbar2();
    out.write_csv(
        &format!("{prefix}reference.csv"),
        &["t", "ln_C_over_hbar2_fem", "ln_C_over_hbar2_exact"],
        &[&q.series.times, &q.ln_c_over_hbar2(), &ln_exact],
    )?;
    if let Some(c) = c {
        let ok = c.series.c_cl.iter().zip(&c.series.c_cl_stderr).all(|(v, e)| (v - 1.0).abs() <= (3.0 * e).max(1e-9));
        out.check(format!("{prefix}reference classical"), ok, "C_cl = 1 within three standard errors");
    }
    Ok(())
}
