use billiard_core::classical::*;
use billiard_core::geometry::*;
use proptest::prelude::*;

fn eroded_butterfly() -> BilliardDomain {
    erode(&presets::butterfly().normalized().0, 0.03).unwrap()
}

fn polygon_butterfly() -> BilliardDomain {
    BilliardDomain::from_polygon(&presets::butterfly().normalized().0)
}

fn launch() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.2f64..0.5, -0.1f64..0.1, 0.0f64..std::f64::consts::TAU)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn speed_is_conserved_and_trajectory_stays_inside((x, y, th) in launch()) {
        for d in [eroded_butterfly(), polygon_butterfly()] {
            let s = ParticleState::new(Vec2::new(x, y), Vec2::from_angle(th));
            let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
            let tr = evolve(s, 20.0, &d, &times).unwrap();
            prop_assert!(tr.max_speed_drift <= 1e-12);
            for p in &tr.positions {
                prop_assert!(d.contains(*p) || d.distance_to_boundary(*p) <= EPS_GEO);
            }
        }
    }

    #[test]
    fn evolution_is_reversible((x, y, th) in launch()) {
        let d = eroded_butterfly();
        let s = ParticleState::new(Vec2::new(x, y), Vec2::from_angle(th));
        let fwd = evolve(s, 8.0, &d, &[]).unwrap();
        prop_assume!(fwd.is_complete());
        let end = fwd.final_state;
        let back = evolve(ParticleState::new(end.position, -end.velocity), 8.0, &d, &[]).unwrap();
        prop_assume!(back.is_complete());
        let err = back.final_state.position.distance(s.position);
        prop_assert!(err <= 1e-8 * (1.0 + fwd.collisions.len() as f64), "{err} after {} collisions", fwd.collisions.len());
    }
}

fn ensemble(hbar: f64, n: usize) -> WignerEnsembleSpec {
    let mut s = WignerEnsembleSpec::new(
        Vec2::new(0.36, 0.1),
        Vec2::from_angle(std::f64::consts::FRAC_PI_3),
        1.0 / 2f64.sqrt(),
        hbar,
    );
    s.n_samples = n;
    s.seed = 11;
    s
}

#[test]
fn seeded_runs_are_bit_identical() {
    let d = eroded_butterfly();
    let times: Vec<f64> = (0..=20).map(|i| i as f64 * 0.2).collect();
    let a = classical_otoc(&ensemble(2f64.powi(-10), 500), &d, &times).unwrap();
    let b = classical_otoc(&ensemble(2f64.powi(-10), 500), &d, &times).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.c_cl.iter().zip(&b.c_cl) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn bracket_starts_at_one_and_stays_nonnegative() {
    let d = eroded_butterfly();
    let times: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
    let c = classical_otoc(&ensemble(2f64.powi(-10), 400), &d, &times).unwrap();
    assert_eq!(c.c_cl[0], 1.0);
    assert_eq!(c.c_cl_stderr[0], 0.0);
    assert!(c.c_cl.iter().all(|&x| x >= 0.0));
}

#[test]
fn rectangle_oracle_within_three_standard_errors() {
    let d = BilliardDomain::from_polygon(&presets::centered_rectangle(2f64.sqrt(), 1.0 / 2f64.sqrt()));
    let mut s = WignerEnsembleSpec::new(Vec2::new(0.1, 0.05), Vec2::new(0.8, 0.6), 1.0 / 2f64.sqrt(), 2f64.powi(-10));
    s.n_samples = 10_000;
    let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
    let c = classical_otoc(&s, &d, &times).unwrap();
    for (k, (&x, &e)) in c.c_cl.iter().zip(&c.c_cl_stderr).enumerate() {
        assert!((x - 1.0).abs() <= 3.0 * e.max(1e-9), "t = {}: {x} +- {e}", times[k]);
    }
}

#[test]
fn halving_delta0_stays_within_standard_error() {
    let d = eroded_butterfly();
    let times: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
    let base = ensemble(2f64.powi(-10), 1000);
    let half = WignerEnsembleSpec { delta0: base.delta0 / 2.0, ..base.clone() };
    let a = classical_otoc(&base, &d, &times).unwrap();
    let b = classical_otoc(&half, &d, &times).unwrap();
    for k in 1..times.len() {
        // Before any curved wall is hit every sample carries the same bracket
        // and the standard error vanishes; finite-difference rounding remains.
        let rel_err = (a.c_cl_stderr[k] / a.c_cl[k]).max(1e-6);
        assert!((a.c_cl[k].ln() - b.c_cl[k].ln()).abs() < rel_err, "t = {}", times[k]);
    }
}
