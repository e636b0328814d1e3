//! Pipeline stages: geometry, spectral solve, quantum OTOC and classical OTOC.

use anyhow::{anyhow, Context, Result};
use billiard_core::classical::{
    classical_otoc, finite_time_lyapunov, next_collision, ClassicalOtocSeries, LyapunovEstimate, ParticleState,
    WignerEnsembleSpec,
};
use billiard_core::fit::{fit_log_growth, GrowthFit};
use billiard_core::geometry::{BilliardDomain, Vec2};
use billiard_core::quantum::{
    build_operator_matrices, ehrenfest_time, fit_otoc_growth, log_otoc, otoc, project_packet_with, saturation_window,
    truncation_robustness, OperatorMatrices, OtocSeries, PConsistency, ProjectionOptions, SpectralState,
    TruncationCheck, WavePacketSpec,
};
use billiard_core::spectral::{weyl_report, EigenBasis, HygieneReport, WeylReport};
use serde::{Deserialize, Serialize};

use crate::cache::{BasisCache, BasisKey, CacheStatus};
use crate::config::{ExperimentConfig, SectorPolicy};

/// A solved basis at `hbar = 1` with its diagnostics.
pub struct SolvedBasis {
    pub domain: BilliardDomain,
    pub basis: EigenBasis,
    pub key: BasisKey,
    pub cache: CacheStatus,
    pub hygiene: HygieneReport,
    pub weyl: WeylReport,
    /// Operators on the reliable subset, at `hbar = 1`.
    pub ops: OperatorMatrices,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub states: usize,
    pub reliable_states: usize,
    pub nodes: usize,
    pub quarter: bool,
    pub h: f64,
    pub cache: CacheStatus,
    pub hygiene: HygieneReport,
    pub hygiene_passes: bool,
    pub weyl_max_deviation: f64,
    pub weyl_band: f64,
    pub weyl_flagged: bool,
    pub p_consistency: PConsistency,
}

impl SolvedBasis {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            states: self.basis.len(),
            reliable_states: self.ops.dim(),
            nodes: self.basis.mesh.num_nodes(),
            quarter: self.basis.is_quarter(),
            h: self.key.h,
            cache: self.cache,
            hygiene: self.hygiene,
            hygiene_passes: self.hygiene.passes(),
            weyl_max_deviation: self.weyl.max_deviation,
            weyl_band: self.weyl.band,
            weyl_flagged: self.weyl.flagged,
            p_consistency: self.ops.consistency,
        }
    }

    /// Reliable basis at `hbar`.
    pub fn reliable(&self, hbar: f64) -> Result<EigenBasis> {
        Ok(self.basis.truncated(self.ops.dim()).with_hbar(hbar)?)
    }
}

fn use_quarter(policy: SectorPolicy, domain: &BilliardDomain) -> Result<bool> {
    let s = domain.symmetry();
    Ok(match policy {
        SectorPolicy::Full => false,
        SectorPolicy::Auto => s.mirror_x && s.mirror_y,
        SectorPolicy::Quarter => {
            anyhow::ensure!(s.mirror_x && s.mirror_y, "quarter solve needs both reflection symmetries");
            true
        }
    })
}

/// Solve (or load) the basis sized for `hbar`.
pub fn solve_stage(cfg: &ExperimentConfig, hbar: f64, cache: &BasisCache) -> Result<SolvedBasis> {
    let domain = cfg.domain(hbar).context("building the domain")?;
    let quarter = use_quarter(cfg.spectral.sectors, &domain)?;
    let key = BasisKey::new(&domain, cfg.mesh_size(hbar), cfg.state_count(&domain, hbar, quarter), quarter);
    let (basis, status) = cache.get(&domain, &key)?;
    let hygiene = basis.hygiene();
    let weyl = weyl_report(&basis, &domain);
    let ops = build_operator_matrices(&basis.truncated(basis.reliable_len()));
    Ok(SolvedBasis { domain, basis, key, cache: status, hygiene, weyl, ops })
}

/// Time of the first wall hit of the packet center.
pub fn first_collision(domain: &BilliardDomain, r0: Vec2, p0: Vec2) -> Result<f64> {
    Ok(next_collision(&ParticleState::new(r0, p0), domain)?.time)
}

/// One quantum OTOC run at one `hbar`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantumRun {
    pub hbar: f64,
    pub series: OtocSeries,
    pub l_times: Vec<f64>,
    pub l: Vec<f64>,
    pub launches: usize,
    pub c0_over_hbar2: f64,
    pub p_consistency: PConsistency,
    pub t_first_collision: f64,
    pub window: Option<(f64, f64)>,
    pub fit: Option<GrowthFit>,
    pub fit_error: Option<String>,
    pub truncation: Option<TruncationCheck>,
}

impl QuantumRun {
    pub fn ln_c_over_hbar2(&self) -> Vec<f64> {
        self.series.ln_c_over_hbar2()
    }
}

/// Launch points of an ensemble: a sunflower disk around `r0` with
/// golden-angle increments of the launch direction.
pub fn ensemble_launches(cfg: &ExperimentConfig) -> Vec<(Vec2, Vec2)> {
    let (r0, p0) = cfg.launch();
    let Some(e) = &cfg.ensemble else {
        return vec![(r0, p0)];
    };
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..e.launches)
        .map(|k| {
            let rho = e.spread * ((k as f64 + 0.5) / e.launches as f64).sqrt();
            let phi = golden * k as f64;
            (r0 + Vec2::from_angle(phi) * rho, Vec2::from_angle(cfg.packet.theta + phi))
        })
        .collect()
}

/// Project the packet launched at `(r0, p0)`.
pub fn project(
    cfg: &ExperimentConfig,
    solved: &SolvedBasis,
    basis: &EigenBasis,
    r0: Vec2,
    p0: Vec2,
) -> Result<SpectralState> {
    let spec = WavePacketSpec::new(r0, p0, cfg.packet.sigma, basis.hbar);
    let opts = ProjectionOptions { norm_threshold: cfg.packet.norm_threshold, wall_margin: cfg.packet.wall_margin };
    project_packet_with(&spec, basis, &solved.domain, &opts).context("projecting the packet")
}

/// Quantum OTOC at `hbar`, averaged over the ensemble if one is configured.
pub fn quantum_stage(cfg: &ExperimentConfig, solved: &SolvedBasis, hbar: f64) -> Result<QuantumRun> {
    let basis = solved.reliable(hbar)?;
    let ops = solved.ops.with_hbar(hbar);
    let energies = basis.energies();
    let times = cfg.times();
    let launches = ensemble_launches(cfg);
    let stride = cfg.time.log_stride;
    let l_times: Vec<f64> = if stride > 0 { times.iter().step_by(stride).copied().collect() } else { Vec::new() };

    let mut runs = Vec::with_capacity(launches.len());
    let mut states = Vec::with_capacity(launches.len());
    for &(r0, p0) in &launches {
        let state = project(cfg, solved, &basis, r0, p0)?;
        runs.push(otoc(&times, &ops, &energies, &state, hbar)?);
        states.push(state);
    }
    let mut series = runs[0].clone();
    if runs.len() > 1 {
        // Ensemble average of ln C, stored back as C.
        let k = runs.len() as f64;
        series.c = (0..times.len()).map(|i| (runs.iter().map(|r| r.c[i].ln()).sum::<f64>() / k).exp()).collect();
        series.captured_norm = runs.iter().map(|r| r.captured_norm).fold(f64::INFINITY, f64::min);
        series.unitarity_error = runs.iter().map(|r| r.unitarity_error).fold(0.0, f64::max);
    }
    let l = if l_times.is_empty() {
        Vec::new()
    } else {
        let k = states.len() as f64;
        let mut acc = vec![0.0; l_times.len()];
        for s in &states {
            for (a, v) in acc.iter_mut().zip(log_otoc(&l_times, &ops, &energies, s, hbar)?) {
                *a += v / k;
            }
        }
        acc
    };
    if !l.is_empty() {
        series.l = Some(l.clone());
    }

    let (r0, p0) = cfg.launch();
    let t_first_collision = first_collision(&solved.domain, r0, p0)?;
    let start = cfg.fit.start.unwrap_or(t_first_collision);
    let window = match cfg.fit.end {
        Some(end) => Ok((start, end)),
        None => saturation_window(&series, start, cfg.fit.saturation_fraction),
    };
    let (window, fit, fit_error, truncation) = match window {
        Ok(w) => {
            let fit = fit_otoc_growth(&series, w);
            let trunc = truncation_robustness(&times, &ops, &energies, &states[0], hbar, w)?;
            match fit {
                Ok(f) => (Some(w), Some(f), None, Some(trunc)),
                Err(e) => (Some(w), None, Some(e.to_string()), Some(trunc)),
            }
        }
        Err(e) => (None, None, Some(e.to_string()), None),
    };
    Ok(QuantumRun {
        hbar,
        c0_over_hbar2: series.c[0] / (hbar * hbar),
        series,
        l_times,
        l,
        launches: launches.len(),
        p_consistency: ops.consistency,
        t_first_collision,
        window,
        fit,
        fit_error,
        truncation,
    })
}

/// Classical OTOC and growth fit at one `hbar`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalRun {
    pub hbar: f64,
    pub series: ClassicalOtocSeries,
    pub window: (f64, f64),
    pub fit: Option<GrowthFit>,
    pub fit_error: Option<String>,
    /// Half the fitted rate of `ln C_cl` when the fit is valid and positive.
    pub lambda_cl: Option<f64>,
    pub t_ehrenfest: Option<f64>,
    pub lyapunov: Option<LyapunovEstimate>,
}

impl ClassicalRun {
    pub fn ln_c(&self) -> Vec<f64> {
        self.series.c_cl.iter().map(|c| c.ln()).collect()
    }
}

pub fn wigner_spec(cfg: &ExperimentConfig, hbar: f64) -> WignerEnsembleSpec {
    let (r0, p0) = cfg.launch();
    let mut s = WignerEnsembleSpec::new(r0, p0, cfg.packet.sigma, hbar);
    s.n_samples = cfg.classical.samples;
    s.seed = cfg.classical.seed;
    s.delta0 = cfg.classical.delta0;
    s.wall_margin = cfg.packet.wall_margin;
    s
}

pub fn classical_stage(cfg: &ExperimentConfig, domain: &BilliardDomain, hbar: f64) -> Result<ClassicalRun> {
    let spec = wigner_spec(cfg, hbar);
    let times = cfg.times();
    let series = classical_otoc(&spec, domain, &times).context("classical OTOC")?;
    let start = cfg.fit.start.unwrap_or(first_collision(domain, spec.r0, spec.p0)?);
    let window = (start, cfg.classical.fit_end.min(cfg.time.t_max));
    let ln_c: Vec<f64> = series.c_cl.iter().map(|c| c.ln()).collect();
    let (fit, fit_error) = match fit_log_growth(&times, &ln_c, window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let lambda_cl = fit.filter(|f| f.valid && f.rate > 0.0).map(|f| 0.5 * f.rate);
    let t_ehrenfest = lambda_cl.map(|l| ehrenfest_time(hbar, l)).transpose()?;
    let lyapunov = if cfg.classical.lyapunov_duration > 0.0 {
        Some(finite_time_lyapunov(&spec, domain, cfg.classical.lyapunov_duration)?)
    } else {
        None
    };
    Ok(ClassicalRun { hbar, series, window, fit, fit_error, lambda_cl, t_ehrenfest, lyapunov })
}

/// Bases needed for the `hbar` list: one shared solve, or one per value.
pub fn solve_all(cfg: &ExperimentConfig, cache: &BasisCache) -> Result<Vec<(f64, std::rc::Rc<SolvedBasis>)>> {
    if cfg.shares_basis() {
        let shared = std::rc::Rc::new(solve_stage(cfg, cfg.min_hbar(), cache)?);
        Ok(cfg.hbar.iter().map(|&h| (h, shared.clone())).collect())
    } else {
        cfg.hbar.iter().map(|&h| Ok((h, std::rc::Rc::new(solve_stage(cfg, h, cache)?)))).collect()
    }
}

pub(crate) fn require_sweep(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.hbar.len() < 2 {
        return Err(anyhow!("a sweep needs at least two hbar values, got {}", cfg.hbar.len()));
    }
    Ok(())
}
