use billiard_core::analytic::{rectangle_basis, RectangleSpec};
use billiard_core::geometry::*;
use billiard_core::quantum::*;
use billiard_core::spectral::*;
use proptest::prelude::*;
use std::sync::OnceLock;

const HBAR: f64 = 0.125;

struct Butterfly {
    domain: BilliardDomain,
    basis: EigenBasis,
    ops: OperatorMatrices,
}

fn butterfly() -> &'static Butterfly {
    static CELL: OnceLock<Butterfly> = OnceLock::new();
    CELL.get_or_init(|| {
        let domain = BilliardDomain::from_polygon(&presets::butterfly().normalized().0);
        let full = symmetry_sector_solve_with(&domain, 0.02, 60, HBAR, &EigenOptions::default()).unwrap();
        let basis = full.truncated(full.reliable_len());
        let ops = build_operator_matrices(&basis);
        Butterfly { domain, basis, ops }
    })
}

fn loose() -> ProjectionOptions {
    ProjectionOptions { norm_threshold: 0.85, wall_margin: 1.0 }
}

fn series(r0: Vec2, p0: Vec2, times: &[f64]) -> OtocSeries {
    let b = butterfly();
    let spec = WavePacketSpec::new(r0, p0, 1.0 / 2f64.sqrt(), HBAR);
    let st = project_packet_with(&spec, &b.basis, &b.domain, &loose()).unwrap();
    otoc(times, &b.ops, &b.basis.energies(), &st, HBAR).unwrap()
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()))
}

#[test]
fn mirrored_launches_give_the_same_otoc() {
    let times = time_grid(3.0, 31);
    let (r0, p0) = (Vec2::new(0.36, 0.1), Vec2::from_angle(1.0));
    let base = series(r0, p0, &times);
    let fx = series(Vec2::new(-r0.x, r0.y), Vec2::new(-p0.x, p0.y), &times);
    let fy = series(Vec2::new(r0.x, -r0.y), Vec2::new(p0.x, -p0.y), &times);
    assert!(rel_close(&base.c, &fx.c, 1e-9));
    assert!(rel_close(&base.c, &fy.c, 1e-9));
}

#[test]
fn reversing_the_momentum_reverses_time() {
    let times = time_grid(3.0, 31);
    let back: Vec<f64> = times.iter().map(|t| -t).collect();
    let (r0, p0) = (Vec2::new(0.36, 0.1), Vec2::from_angle(1.0));
    let a = series(r0, -p0, &times);
    let b = series(r0, p0, &back);
    assert!(rel_close(&a.c, &b.c, 1e-9));
}

#[test]
fn commutator_at_zero_and_jensen_bound() {
    let b = butterfly();
    let spec = WavePacketSpec::new(Vec2::new(0.36, 0.1), Vec2::from_angle(1.0), 1.0 / 2f64.sqrt(), HBAR);
    let st = project_packet_with(&spec, &b.basis, &b.domain, &loose()).unwrap();
    let e = b.basis.energies();
    let times = time_grid(3.0, 13);
    let s = otoc(&times, &b.ops, &e, &st, HBAR).unwrap();
    assert!(s.c.iter().all(|&c| c.is_finite() && c >= 0.0));
    assert!(s.unitarity_error < 1e-12);
    let l = log_otoc(&times, &b.ops, &e, &st, HBAR).unwrap();
    for (li, lc) in l.iter().zip(s.ln_c_over_hbar2()) {
        assert!(*li <= lc + 1e-9, "{li} > {lc}");
    }
}

#[test]
fn analytic_rectangle_otoc_starts_at_hbar_squared() {
    let hbar = 0.05;
    let r = rectangle_basis(&RectangleSpec::unit_area(1.3, 60, 60), hbar).unwrap();
    let st = r.packet((0.6, 0.35), (0.8, 0.6), 1.0 / 2f64.sqrt()).unwrap();
    assert!(st.captured_norm > 0.999);
    let s = otoc(&[0.0], &r.operators(), &r.energies, &st, hbar).unwrap();
    assert!((s.c[0] / (hbar * hbar) - 1.0).abs() < 0.02, "{}", s.c[0] / (hbar * hbar));
}

#[test]
fn truncation_check_flags_small_bases() {
    let hbar = 0.05;
    let r = rectangle_basis(&RectangleSpec::unit_area(1.3, 60, 60), hbar).unwrap();
    let e = &r.energies;
    let ops = r.operators();
    let st = r.packet((0.6, 0.35), (0.8, 0.6), 1.0 / 2f64.sqrt()).unwrap();
    let times = time_grid(2.0, 21);
    // The packet sits well below the top of the full basis.
    let n = 1500;
    let big =
        truncation_robustness(&times, &ops.truncated(n), &e[..n], &st.truncated(n).unwrap(), hbar, (0.0, 2.0)).unwrap();
    assert!(big.robust, "{big:?}");
    // Cutting into the packet's energy shell changes the commutator.
    let n = 40;
    let small =
        truncation_robustness(&times, &ops.truncated(n), &e[..n], &st.truncated(n).unwrap(), hbar, (0.0, 2.0)).unwrap();
    assert!(!small.robust, "{small:?}");
}

#[test]
fn fem_packet_overlaps_match_sine_overlaps() {
    let hbar = 0.04;
    let r = rectangle_basis(&RectangleSpec { a: 1.0, b: 1.0, nx: 30, ny: 30 }, hbar).unwrap();
    let d = BilliardDomain::from_polygon(&presets::unit_square());
    let n = 110;
    let b = solve_basis(&d, 0.015, n, hbar).unwrap();
    let (r0, p0) = ((0.5, 0.5), (0.8, 0.6));
    let exact = r.packet(r0, p0, 1.0 / 2f64.sqrt()).unwrap();
    let packet = WavePacketSpec::new(Vec2::new(r0.0, r0.1), Vec2::new(p0.0, p0.1), 1.0 / 2f64.sqrt(), hbar);
    let opts = ProjectionOptions { norm_threshold: 0.0, ..Default::default() };
    let fem = project_packet_with(&packet, &b, &d, &opts).unwrap();
    let weight = |s: &SpectralState, k: usize| s.coeffs[k].norm_sqr() * s.captured_norm;
    // Square levels are degenerate, so compare weights summed over each level.
    let levels = r.levels();
    let mut k = 0;
    while k < n - 2 {
        let mut j = k + 1;
        while j < levels.len() && (levels[j] - levels[k]).abs() < 1e-9 {
            j += 1;
        }
        if j > n {
            break;
        }
        let we: f64 = (k..j).map(|i| weight(&exact, i)).sum();
        let wf: f64 = (k..j).map(|i| weight(&fem, i)).sum();
        assert!((we - wf).abs() < 0.01, "level {}: {we} vs {wf}", levels[k]);
        k = j;
    }
    let total: f64 = (0..n).map(|i| weight(&exact, i)).sum();
    assert!((total - fem.captured_norm).abs() < 0.02, "{total} vs {}", fem.captured_norm);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_is_unitary_and_c_nonnegative(
        x in 0.3f64..0.8, y in 0.3f64..0.5, th in 0.0f64..std::f64::consts::TAU, t in -20.0f64..20.0
    ) {
        let hbar = 0.1;
        let r = rectangle_basis(&RectangleSpec::unit_area(1.3, 25, 25), hbar).unwrap();
        let st = r.packet((x, y), (th.cos(), th.sin()), 1.0 / 2f64.sqrt()).unwrap();
        let s = otoc(&[0.0, t], &r.operators(), &r.energies, &st, hbar).unwrap();
        prop_assert!(s.unitarity_error < 1e-12);
        prop_assert!(s.c.iter().all(|&c| c.is_finite() && c >= 0.0));
    }

    #[test]
    fn otoc_is_deterministic(t in 0.0f64..5.0) {
        let hbar = 0.1;
        let r = rectangle_basis(&RectangleSpec::unit_area(1.3, 20, 20), hbar).unwrap();
        let st = r.packet((0.5, 0.4), (1.0, 0.0), 1.0 / 2f64.sqrt()).unwrap();
        let a = otoc(&[t], &r.operators(), &r.energies, &st, hbar).unwrap();
        let b = otoc(&[t], &r.operators(), &r.energies, &st, hbar).unwrap();
        prop_assert_eq!(a.c[0].to_bits(), b.c[0].to_bits());
    }
}
