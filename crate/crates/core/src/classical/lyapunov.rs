use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{sample_wigner, WignerEnsembleSpec, MAX_INVALID_FRACTION};
use super::flight::{Billiard, ParticleState};
use crate::error::{Error, Result};
use crate::fit::{growth_is_valid, linear_fit};
use crate::geometry::{BilliardDomain, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    pub lambda_stderr: f64,
    /// Regression window.
    pub window: (f64, f64),
    /// `|2 lambda| >= 5 / window length`.
    pub valid: bool,
    pub n_renormalizations: usize,
    pub valid_samples: usize,
    pub invalid_samples: usize,
    /// Renormalization times and the ensemble mean of the accumulated log stretch.
    pub times: Vec<f64>,
    pub mean_log_stretch: Vec<f64>,
}

/// Accumulated `ln(d / delta0)` after each renormalization interval `tau`,
/// or `None` if either run hits a corner or a corner splits the pair.
pub fn log_stretch_series(
    billiard: &Billiard<'_>,
    reference: ParticleState,
    delta0: f64,
    tau: f64,
    steps: usize,
) -> Result<Option<Vec<f64>>> {
    let speed = reference.speed();
    let v_hat = reference.velocity / speed;
    let dir = (Vec2::new(1.0, 0.0), v_hat.perp());
    let mut a = reference;
    let mut b = ParticleState::new(
        a.position + dir.0 * (delta0 * std::f64::consts::FRAC_1_SQRT_2),
        a.velocity + dir.1 * (delta0 * std::f64::consts::FRAC_1_SQRT_2),
    );
    b.velocity = b.velocity * (speed / b.velocity.norm());
    if !billiard.domain().is_interior(b.position) {
        return Ok(None);
    }
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let ta = billiard.evolve(a, tau, &[])?;
        let tb = billiard.evolve(b, tau, &[])?;
        if !ta.is_complete() || !tb.is_complete() || !billiard.same_itinerary(&ta.collisions, &tb.collisions) {
            return Ok(None);
        }
        a = ta.final_state;
        b = tb.final_state;
        let dr = b.position - a.position;
        let dv = b.velocity - a.velocity;
        let d = (dr.norm_sq() + dv.norm_sq()).sqrt();
        if !(d > 0.0) {
            return Ok(None);
        }
        acc += (d / delta0).ln();
        out.push(acc);
        // Rescale to delta0, keeping the partner on the reference energy shell.
        let s = delta0 / d;
        let pos = a.position + dr * s;
        if !billiard.domain().is_interior(pos) {
            return Ok(None);
        }
        let vel = a.velocity + dv * s;
        b = ParticleState::new(pos, vel * (speed / vel.norm()));
    }
    Ok(Some(out))
}

/// Finite-time Lyapunov exponent over the Wigner ensemble, from the slope of
/// the mean accumulated log stretch over `[duration / 2, duration]`. The
/// first half is discarded so that linear (shear) separation growth does not
/// masquerade as a positive exponent.
pub fn finite_time_lyapunov(
    spec: &WignerEnsembleSpec,
    domain: &BilliardDomain,
    duration: f64,
) -> Result<LyapunovEstimate> {
    finite_time_lyapunov_with(spec, domain, duration, None)
}

/// As [`finite_time_lyapunov`] with an explicit renormalization interval
/// (default: a quarter of the mean free time `pi A / P`).
pub fn finite_time_lyapunov_with(
    spec: &WignerEnsembleSpec,
    domain: &BilliardDomain,
    duration: f64,
    tau: Option<f64>,
) -> Result<LyapunovEstimate> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be > 0, got {duration}")));
    }
    let speed = spec.p0.norm();
    let tau = tau.unwrap_or(0.25 * std::f64::consts::PI * domain.area() / domain.perimeter() / speed);
    let steps = (duration / tau).ceil().max(2.0) as usize;
    let tau = duration / steps as f64;
    let states = sample_wigner(spec, domain, spec.delta0)?;
    let billiard = Billiard::new(domain);
    let series: Vec<Option<Vec<f64>>> =
        states.par_iter().map(|&s| log_stretch_series(&billiard, s, spec.delta0, tau, steps)).collect::<Result<_>>()?;
    let invalid = series.iter().filter(|s| s.is_none()).count();
    if invalid as f64 > MAX_INVALID_FRACTION * spec.n_samples as f64 {
        return Err(Error::TooManyInvalidSamples { invalid, total: spec.n_samples });
    }
    let n = spec.n_samples - invalid;
    let mut mean = vec![0.0; steps];
    for s in series.iter().flatten() {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut times = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(steps + 1);
    times.push(0.0);
    ys.push(0.0);
    for (k, &m) in mean.iter().enumerate() {
        times.push(tau * (k + 1) as f64);
        ys.push(m);
    }
    let window = (0.5 * duration, duration);
    let (fx, fy): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&ys).filter(|(&t, _)| t >= window.0 - 1e-12).map(|(&t, &y)| (t, y)).unzip();
    let fit = linear_fit(&fx, &fy)?;
    Ok(LyapunovEstimate {
        lambda: fit.slope,
        lambda_stderr: fit.slope_stderr,
        window,
        valid: growth_is_valid(2.0 * fit.slope.abs(), window),
        n_renormalizations: steps,
        valid_samples: n,
        invalid_samples: invalid,
        times,
        mean_log_stretch: ys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;

    #[test]
    fn rectangle_has_no_exponent() {
        let d = BilliardDomain::from_polygon(&presets::centered_rectangle(2.0, 0.5));
        let mut s = WignerEnsembleSpec::new(Vec2::new(0.1, 0.0), Vec2::new(0.8, 0.6), 1.0, 1e-3);
        s.n_samples = 200;
        let est = finite_time_lyapunov(&s, &d, 20.0).unwrap();
        assert!(!est.valid, "{est:?}");
        assert!(est.lambda.abs() < 0.125, "{}", est.lambda);
    }
}
