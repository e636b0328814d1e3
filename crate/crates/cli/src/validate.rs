//! Acceptance suite at desk scale.
//!
//! Each criterion reports pass or fail with a one-line detail. Expensive
//! runs are computed once and shared between criteria.

use std::rc::Rc;
use std::time::Instant;

use anyhow::{Context, Result};
use billiard_core::analytic::{box_otoc, rectangle_basis, revival_time, BoxSpec1D, RectangleSpec};
use billiard_core::classical::{classical_otoc, evolve, ParticleState, WignerEnsembleSpec};
use billiard_core::geometry::{presets as shapes, BilliardDomain, Vec2};
use billiard_core::quantum::{log_otoc, otoc, time_grid};
use billiard_core::spectral::{
    count_at, solve_basis, solve_on_mesh, symmetry_sector_solve, weyl_report_levels, EigenOptions, HygieneReport,
};
use serde::{Deserialize, Serialize};

use crate::cache::BasisCache;
use crate::pipeline::{classical_stage, project, quantum_stage, solve_all, ClassicalRun, QuantumRun, SolvedBasis};
use crate::presets;

/// Criteria whose failure at desk scale is understood and documented.
pub const KNOWN_GAPS: &[u8] = &[11];

pub const TITLES: [&str; 12] = [
    "FEM accuracy on the unit square",
    "Weyl validation on the unit square",
    "spectral hygiene and sector agreement",
    "commutator at t = 0",
    "momentum-matrix consistency",
    "box revivals",
    "rectangle classical oracle",
    "classical dichotomy",
    "quantum growth in the polygonal butterfly",
    "polygon versus rounded butterfly",
    "classical-quantum correspondence window",
    "property checks",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        format!("[{mark}] {:>2}. {}: {} ({:.1} s)", self.id, self.title, self.detail, self.seconds)
    }
}

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    pub cache: BasisCache,
    /// Negative control: solve the unit-square checks on a deliberately coarse mesh.
    pub coarse: bool,
    pub only: Option<Vec<u8>>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { cache: BasisCache::disabled(), coarse: false, only: None }
    }
}

struct Run {
    solved: Rc<SolvedBasis>,
    quantum: Vec<QuantumRun>,
}

/// Shared, lazily computed runs.
struct Ctx {
    opts: ValidateOptions,
    sweep: Option<Rc<Run>>,
    polygon: Option<Rc<Run>>,
    rounded: Option<Rc<Run>>,
    triangle: Option<Rc<Run>>,
    classical_polygon: Option<Rc<ClassicalRun>>,
    classical_rounded: Option<Rc<ClassicalRun>>,
    hygiene: Vec<(String, HygieneReport)>,
}

impl Ctx {
    fn run(&mut self, name: &str) -> Result<Rc<Run>> {
        let slot = match name {
            "butterfly-sweep" => &self.sweep,
            "butterfly" => &self.polygon,
            "butterfly-rounded" => &self.rounded,
            "triangle" => &self.triangle,
            _ => unreachable!("no shared run named {name}"),
        };
        if let Some(r) = slot {
            return Ok(r.clone());
        }
        let cfg = presets::get(name).expect("shared runs use shipped presets");
        let solved = solve_all(&cfg, &self.opts.cache).with_context(|| format!("{name}: spectral solve"))?;
        let basis = solved[0].1.clone();
        self.hygiene.push((name.to_string(), basis.hygiene));
        let quantum = solved
            .iter()
            .map(|(h, s)| quantum_stage(&cfg, s, *h).with_context(|| format!("{name}: quantum run at hbar = {h}")))
            .collect::<Result<Vec<_>>>()?;
        let run = Rc::new(Run { solved: basis, quantum });
        match name {
            "butterfly-sweep" => self.sweep = Some(run.clone()),
            "butterfly" => self.polygon = Some(run.clone()),
            "butterfly-rounded" => self.rounded = Some(run.clone()),
            _ => self.triangle = Some(run.clone()),
        }
        Ok(run)
    }

    fn classical(&mut self, rounded: bool) -> Result<Rc<ClassicalRun>> {
        let slot = if rounded { &self.classical_rounded } else { &self.classical_polygon };
        if let Some(c) = slot {
            return Ok(c.clone());
        }
        let cfg = presets::get(if rounded { "butterfly-rounded" } else { "butterfly" }).unwrap();
        let hbar = cfg.hbar[0];
        let c = Rc::new(classical_stage(&cfg, &cfg.domain(hbar)?, hbar)?);
        if rounded {
            self.classical_rounded = Some(c.clone());
        } else {
            self.classical_polygon = Some(c.clone());
        }
        Ok(c)
    }
}

type Outcome = Result<(bool, String)>;

/// Run the selected criteria, in order.
pub fn run(opts: ValidateOptions) -> Vec<CriterionResult> {
    let only = opts.only.clone();
    let mut ctx = Ctx {
        opts,
        sweep: None,
        polygon: None,
        rounded: None,
        triangle: None,
        classical_polygon: None,
        classical_rounded: None,
        hygiene: Vec::new(),
    };
    let checks: [fn(&mut Ctx) -> Outcome; 12] = [
        c1_fem_accuracy,
        c2_weyl,
        c4_commutator_at_zero,
        c5_momentum_consistency,
        c6_box_revivals,
        c7_rectangle_classical,
        c8_classical_dichotomy,
        c9_polygon_growth,
        c10_polygon_vs_rounded,
        c11_correspondence,
        c12_properties,
        c3_hygiene,
    ];
    let ids = [1u8, 2, 4, 5, 6, 7, 8, 9, 10, 11, 12, 3];
    let mut out = Vec::new();
    for (id, check) in ids.into_iter().zip(checks) {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let (passed, detail) = check(&mut ctx).unwrap_or_else(|e| (false, format!("error: {e:#}")));
        out.push(CriterionResult {
            id,
            title: TITLES[id as usize - 1].into(),
            passed,
            detail,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    out.sort_by_key(|r| r.id);
    out
}

fn square_levels(n: usize) -> Vec<f64> {
    rectangle_basis(&RectangleSpec { a: 1.0, b: 1.0, nx: 40, ny: 40 }, 1.0)
        .expect("valid rectangle")
        .levels()
        .into_iter()
        .take(n)
        .collect()
}

fn relative_errors(fem: &[f64], exact: &[f64]) -> Vec<f64> {
    fem.iter().zip(exact).map(|(a, b)| (a / b - 1.0).abs()).collect()
}

fn c1_fem_accuracy(ctx: &mut Ctx) -> Outcome {
    let d = BilliardDomain::from_polygon(&shapes::unit_square());
    let h = if ctx.opts.coarse { 0.07 } else { 0.02 };
    let exact = square_levels(20);
    let fine = solve_basis(&d, h, 20, 1.0)?;
    let coarse = solve_basis(&d, 2.0 * h, 20, 1.0)?;
    ctx.hygiene.push(("unit square".into(), fine.hygiene()));
    let e_fine = relative_errors(&fine.lambdas, &exact);
    let e_coarse = relative_errors(&coarse.lambdas, &exact);
    let worst = e_fine.iter().copied().fold(0.0, f64::max);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let order = (mean(&e_coarse) / mean(&e_fine)).log2();
    let ok = worst < 0.005 && (1.7..=2.3).contains(&order);
    Ok((ok, format!("h = {h}: worst relative error {worst:.2e} (limit 5e-3), observed order {order:.2}")))
}

fn c2_weyl(ctx: &mut Ctx) -> Outcome {
    let d = BilliardDomain::from_polygon(&shapes::centered_square(1.0));
    let exact = rectangle_basis(&RectangleSpec { a: 1.0, b: 1.0, nx: 40, ny: 40 }, 1.0)?;
    let oracle = exact.count_below(1000.0);
    let h = if ctx.opts.coarse { 0.05 } else { 0.005 };
    let b = symmetry_sector_solve(&d, h, 28)?.unfold();
    ctx.hygiene.push(("unit square, Weyl".into(), b.hygiene()));
    let eps = exact.levels();
    let cutoff = b.lambdas[b.reliable_len() - 1];
    let mut checked = 0;
    let mut mismatched = 0;
    for w in eps.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-9) && w[1] < cutoff) {
        let mid = 0.5 * (w[0] + w[1]);
        checked += 1;
        if count_at(&b.lambdas, mid) != count_at(&eps, mid) {
            mismatched += 1;
        }
    }
    let fem_1000 = count_at(&b.lambdas[..b.reliable_len()], 1000.0);
    let weyl = weyl_report_levels(&b.lambdas, 1.0, 4.0, 5.0);
    let ok = oracle == 71 && fem_1000 == oracle && mismatched == 0 && weyl.max_deviation <= 5.0;
    Ok((
        ok,
        format!(
            "exact count {oracle} (expected 71), FEM count {fem_1000}, {mismatched} of {checked} mid-gap counts differ, \
             Weyl deviation {:.2} (limit 5)",
            weyl.max_deviation
        ),
    ))
}

fn c3_hygiene(ctx: &mut Ctx) -> Outcome {
    let d = BilliardDomain::from_polygon(&shapes::centered_square(1.0));
    let s = symmetry_sector_solve(&d, 0.03, 8)?.unfold();
    let f = solve_on_mesh(s.mesh.clone(), s.len(), &EigenOptions::default())?;
    let sector_gap = s.lambdas.iter().zip(&f.lambdas).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
    let failing: Vec<&str> = ctx.hygiene.iter().filter(|(_, r)| !r.passes()).map(|(n, _)| n.as_str()).collect();
    let worst_orth = ctx.hygiene.iter().map(|(_, r)| r.max_orthonormality_error).fold(0.0, f64::max);
    let worst_res = ctx.hygiene.iter().map(|(_, r)| r.max_relative_residual).fold(0.0, f64::max);
    let ok = failing.is_empty() && sector_gap < 1e-9;
    Ok((
        ok,
        format!(
            "{} bases, worst orthonormality {worst_orth:.1e} (limit 1e-8), worst residual {worst_res:.1e} (limit 1e-6){}; \
             sector vs full {sector_gap:.1e}",
            ctx.hygiene.len(),
            if failing.is_empty() { String::new() } else { format!(", failing: {}", failing.join(", ")) }
        ),
    ))
}

fn c4_commutator_at_zero(ctx: &mut Ctx) -> Outcome {
    let mut runs = Vec::new();
    for name in ["butterfly", "butterfly-sweep", "triangle"] {
        let r = ctx.run(name)?;
        for q in &r.quantum {
            runs.push((name, q.hbar, q.series.captured_norm, q.c0_over_hbar2));
        }
    }
    let eligible: Vec<_> = runs.iter().filter(|r| r.2 >= 0.999).collect();
    let ok = eligible.len() == runs.len() && eligible.iter().all(|r| (0.98..=1.02).contains(&r.3));
    let parts: Vec<String> =
        runs.iter().map(|(n, h, cap, c0)| format!("{n} hbar={h}: {c0:.4} (captured {cap:.5})")).collect();
    Ok((ok, parts.join("; ")))
}

fn c5_momentum_consistency(ctx: &mut Ctx) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["butterfly", "butterfly-rounded", "butterfly-sweep", "triangle"] {
        let r = ctx.run(name)?;
        let c = r.solved.ops.consistency;
        ok &= c.median_relative < 0.01;
        parts.push(format!("{name}: {:.2}%", 100.0 * c.median_relative));
    }
    Ok((ok, format!("median discrepancy {} (limit 1%)", parts.join(", "))))
}

fn c6_box_revivals(_: &mut Ctx) -> Outcome {
    let spec =
        BoxSpec1D { length: 1.0, hbar: 0.02, x0: 0.4, p0: 1.0, sigma: std::f64::consts::FRAC_1_SQRT_2, modes: 80 };
    let t_rev = revival_time(spec.length, spec.hbar);
    let times = time_grid(t_rev, 2001);
    let s = box_otoc(&spec, &times)?;
    let rel = (s.c[s.c.len() - 1] - s.c[0]).abs() / s.c[0];
    // Maximal runs of increase spanning at least five samples.
    let mut growth = 0;
    let mut run = 0;
    for w in s.c.windows(2) {
        if w[1] > w[0] {
            run += 1;
        } else {
            if run >= 5 {
                growth += 1;
            }
            run = 0;
        }
    }
    if run >= 5 {
        growth += 1;
    }
    let ok = rel < 1e-6 && growth >= 2;
    Ok((ok, format!("|C(t_rev) - C(0)| / C(0) = {rel:.1e} (limit 1e-6), {growth} growth intervals")))
}

fn c7_rectangle_classical(_: &mut Ctx) -> Outcome {
    let d = BilliardDomain::from_polygon(&shapes::centered_rectangle(2f64.sqrt(), 0.5f64.sqrt()));
    let mut spec = WignerEnsembleSpec::new(Vec2::new(0.1, 0.05), Vec2::from_angle(0.7), 1.0, 1e-3);
    spec.seed = 3;
    let times = time_grid(10.0, 41);
    let c = classical_otoc(&spec, &d, &times)?;
    let worst =
        c.c_cl.iter().zip(&c.c_cl_stderr).map(|(v, e)| (v - 1.0).abs() / (3.0 * e).max(1e-9)).fold(0.0, f64::max);
    Ok((
        worst <= 1.0 && c.valid_samples == spec.n_samples,
        format!("{} samples, worst |C_cl - 1| is {worst:.2} of the 3-sigma band", c.valid_samples),
    ))
}

fn c8_classical_dichotomy(ctx: &mut Ctx) -> Outcome {
    let poly = ctx.classical(false)?;
    let round = ctx.classical(true)?;
    let poly_valid = poly.fit.is_some_and(|f| f.valid);
    let rate = round.fit.map_or(f64::NAN, |f| f.rate);
    let round_valid = round.fit.is_some_and(|f| f.valid) && round.lambda_cl.is_some_and(|l| l > 0.0);

    let mut cfg = presets::get("butterfly-rounded").unwrap();
    cfg.classical.delta0 *= 0.5;
    let hbar = cfg.hbar[0];
    let halved = classical_stage(&cfg, &cfg.domain(hbar)?, hbar)?;
    let rate_half = halved.fit.map_or(f64::NAN, |f| f.rate);
    let drift = (rate_half / rate - 1.0).abs();

    let ok = !poly_valid && round_valid && drift < 0.01;
    Ok((
        ok,
        format!(
            "polygon rate {:.3} valid {poly_valid}; rounded rate {rate:.3} valid {round_valid}, lambda_cl {:.3}; \
             halving delta0 moves the rate by {drift:.1e} (limit 1e-2)",
            poly.fit.map_or(f64::NAN, |f| f.rate),
            round.lambda_cl.unwrap_or(f64::NAN)
        ),
    ))
}

fn c9_polygon_growth(ctx: &mut Ctx) -> Outcome {
    let r = ctx.run("butterfly-sweep")?;
    let mut parts = Vec::new();
    let mut rates = Vec::new();
    let mut ok = true;
    for q in &r.quantum {
        let (rate, valid) = q.fit.map_or((f64::NAN, false), |f| (f.rate, f.valid));
        let w = q.window.unwrap_or((f64::NAN, f64::NAN));
        ok &= valid && rate > 0.0;
        rates.push(rate);
        parts.push(format!("hbar={}: rate {rate:.3} on [{:.2}, {:.2}] valid {valid}", q.hbar, w.0, w.1));
    }
    ok &= rates.len() == 2 && rates[1] > rates[0];
    Ok((ok, format!("{} states; {}", r.solved.ops.dim(), parts.join("; "))))
}

/// Largest gap between two log series over `[a, b]`, relative to the
/// largest magnitude of `reference` there.
fn normalized_gap(times: &[f64], reference: &[f64], other: &[f64], a: f64, b: f64) -> f64 {
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= a && times[i] <= b).collect();
    let scale = idx.iter().map(|&i| reference[i].abs()).fold(0.0, f64::max);
    idx.iter().map(|&i| (reference[i] - other[i]).abs()).fold(0.0, f64::max) / scale
}

fn c10_polygon_vs_rounded(ctx: &mut Ctx) -> Outcome {
    let p = ctx.run("butterfly")?;
    let r = ctx.run("butterfly-rounded")?;
    let (qp, qr) = (&p.quantum[0], &r.quantum[0]);
    let (a, b) = qp.window.context("polygon fit window")?;
    let gap = normalized_gap(&qp.series.times, &qp.ln_c_over_hbar2(), &qr.ln_c_over_hbar2(), a, b);
    Ok((
        gap <= 0.1,
        format!("hbar={}: max gap {:.2}% of max |ln(C/hbar^2)| on [{a:.2}, {b:.2}] (limit 10%)", qp.hbar, 100.0 * gap),
    ))
}

fn c11_correspondence(ctx: &mut Ctx) -> Outcome {
    let r = ctx.run("butterfly-rounded")?;
    let c = ctx.classical(true)?;
    let q = &r.quantum[0];
    let t_e = c.t_ehrenfest.context("classical fit gave no positive exponent")?;
    let times = &q.series.times;
    let lq = q.ln_c_over_hbar2();
    let lc = c.ln_c();
    let gap = normalized_gap(times, &lc, &lq, q.t_first_collision, t_e);
    let after: Vec<usize> = (0..times.len()).filter(|&i| times[i] > t_e).collect();
    let below = after.iter().filter(|&&i| lq[i] < lc[i]).count();
    let ok = gap <= 0.1 && below == after.len();
    Ok((
        ok,
        format!(
            "t_E = {t_e:.2}; max gap {:.1}% of max |ln C_cl| on [{:.2}, {t_e:.2}] (limit 10%); quantum below classical at \
             {below} of {} later samples",
            100.0 * gap,
            q.t_first_collision,
            after.len()
        ),
    ))
}

fn c12_properties(ctx: &mut Ctx) -> Outcome {
    let r = ctx.run("butterfly-rounded")?;
    let cfg = presets::get("butterfly-rounded").unwrap();
    let q = &r.quantum[0];
    let mut fails = Vec::new();

    let unitarity = q.series.unitarity_error;
    if !(unitarity < 1e-10 && q.series.c.iter().all(|&c| c >= 0.0)) {
        fails.push(format!("unitarity {unitarity:.1e}"));
    }
    let lc = q.ln_c_over_hbar2();
    let stride = cfg.time.log_stride.max(1);
    let jensen = q.l.iter().enumerate().map(|(k, l)| l - lc[k * stride]).fold(f64::NEG_INFINITY, f64::max);
    if q.l.is_empty() || jensen > 1e-9 {
        fails.push(format!("Jensen excess {jensen:.1e}"));
    }

    let hbar = q.hbar;
    let basis = r.solved.reliable(hbar)?;
    let (r0, p0) = cfg.launch();
    let state = project(&cfg, &r.solved, &basis, r0, p0)?;
    let again = otoc(&q.series.times, &r.solved.ops.with_hbar(hbar), &basis.energies(), &state, hbar)?;
    if again.c != q.series.c {
        fails.push("quantum run not reproducible".into());
    }
    let c = ctx.classical(true)?;
    let c2 = classical_stage(&cfg, &r.solved.domain, hbar)?;
    if c2.series != c.series {
        fails.push("classical run not reproducible".into());
    }

    let domain = &r.solved.domain;
    let mut worst_back = 0.0f64;
    for k in 0..8 {
        let start = ParticleState::new(r0, Vec2::from_angle(0.4 + 0.7 * k as f64));
        let fwd = evolve(start, 5.0, domain, &[])?;
        let s = fwd.final_state;
        let back = evolve(ParticleState::new(s.position, -s.velocity), 5.0, domain, &[])?;
        let err = (back.final_state.position - start.position).norm() / (1.0 + fwd.collisions.len() as f64);
        worst_back = worst_back.max(err);
    }
    if worst_back > 1e-8 {
        fails.push(format!("reversibility {worst_back:.1e}"));
    }

    let trunc = ctx.run("butterfly")?.quantum[0].truncation.clone();
    let robust = trunc.as_ref().is_some_and(|t| t.robust);
    if !robust {
        fails.push(format!("truncation {trunc:?}"));
    }
    let l_check = log_otoc(&q.l_times[..1], &r.solved.ops.with_hbar(hbar), &basis.energies(), &state, hbar)?;
    if (l_check[0] - q.l[0]).abs() > 1e-12 {
        fails.push("L not reproducible".into());
    }

    let detail = format!(
        "unitarity {unitarity:.1e}, Jensen max(L - ln C/hbar^2) {jensen:.2e}, reversibility {worst_back:.1e}, \
         truncation change {:.3}, determinism checked{}",
        trunc.map_or(f64::NAN, |t| t.max_log_change),
        if fails.is_empty() { String::new() } else { format!("; failing: {}", fails.join(", ")) }
    );
    Ok((fails.is_empty(), detail))
}
