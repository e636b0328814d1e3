use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flight::{Billiard, ParticleState};
use crate::error::{Error, Result};
use crate::geometry::{BilliardDomain, Point2, Vec2};

/// Default finite-difference offset.
pub const DEFAULT_DELTA0: f64 = 1e-7;
/// Default ensemble size.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Largest tolerated fraction of rejected draws or invalid samples.
pub const MAX_INVALID_FRACTION: f64 = 0.01;
/// Default launch clearance in units of `sigma * sqrt(hbar)`.
pub const DEFAULT_WALL_MARGIN: f64 = 3.0;

/// Gaussian Wigner ensemble of a minimal-uncertainty packet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerEnsembleSpec {
    pub r0: Point2,
    pub p0: Vec2,
    pub sigma: f64,
    pub hbar: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub delta0: f64,
    /// Required distance of `r0` from the walls, in units of `sigma * sqrt(hbar)`.
    pub wall_margin: f64,
}

impl WignerEnsembleSpec {
    pub fn new(r0: Point2, p0: Vec2, sigma: f64, hbar: f64) -> Self {
        Self {
            r0,
            p0,
            sigma,
            hbar,
            n_samples: DEFAULT_SAMPLES,
            seed: 0,
            delta0: DEFAULT_DELTA0,
            wall_margin: DEFAULT_WALL_MARGIN,
        }
    }

    pub fn position_std(&self) -> f64 {
        self.sigma * (self.hbar / 2.0).sqrt()
    }

    pub fn momentum_std(&self) -> f64 {
        (self.hbar / 2.0).sqrt() / self.sigma
    }

    pub fn validate(&self, domain: &BilliardDomain) -> Result<()> {
        if !(self.sigma > 0.0 && self.hbar > 0.0) {
            return Err(Error::InvalidArgument("sigma and hbar must be positive".into()));
        }
        if !(self.delta0 > 0.0) {
            return Err(Error::InvalidArgument(format!("delta0 must be > 0, got {}", self.delta0)));
        }
        if !(self.p0.norm() > 0.0) {
            return Err(Error::InvalidArgument("p0 must be nonzero".into()));
        }
        let need = self.wall_margin * self.sigma * self.hbar.sqrt();
        if !domain.is_interior(self.r0) || domain.distance_to_boundary(self.r0) < need {
            return Err(Error::BadInitialCondition(format!(
                "r0 = ({}, {}) must lie at least {need} inside the boundary",
                self.r0.x, self.r0.y
            )));
        }
        Ok(())
    }
}

/// Draw the ensemble. Sample `i` uses its own stream so results do not
/// depend on scheduling. Draws whose position (or finite-difference
/// partners at `+-margin` in `x`) fall outside the domain are redrawn.
pub fn sample_wigner(spec: &WignerEnsembleSpec, domain: &BilliardDomain, margin: f64) -> Result<Vec<ParticleState>> {
    spec.validate(domain)?;
    let pos = Normal::new(0.0, spec.position_std()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mom = Normal::new(0.0, spec.momentum_std()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let results: Vec<(ParticleState, usize)> = (0..spec.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let mut rejected = 0;
            loop {
                let r = spec.r0 + Vec2::new(pos.sample(&mut rng), pos.sample(&mut rng));
                let p = spec.p0 + Vec2::new(mom.sample(&mut rng), mom.sample(&mut rng));
                let dx = Vec2::new(margin, 0.0);
                let inside = [r, r + dx, r - dx]
                    .iter()
                    .all(|&q| domain.is_interior(q) && domain.distance_to_boundary(q) > margin);
                if inside && p.norm() > 0.0 {
                    return (ParticleState::new(r, p), rejected);
                }
                rejected += 1;
            }
        })
        .collect();
    let rejected: usize = results.iter().map(|r| r.1).sum();
    let drawn = rejected + spec.n_samples;
    if rejected as f64 > MAX_INVALID_FRACTION * drawn as f64 {
        return Err(Error::BadInitialCondition(format!("{rejected} of {drawn} Wigner draws fell outside the domain")));
    }
    Ok(results.into_iter().map(|r| r.0).collect())
}

/// `dx(t)/dx(0)` at fixed momentum from partner trajectories launched at
/// `x(0) +- delta0`, normalized by their actual initial separation.
/// `None` if a partner hits a corner or the two partners are split by a
/// corner.
pub fn bracket_series(
    billiard: &Billiard<'_>,
    state: ParticleState,
    delta0: f64,
    duration: f64,
    times: &[f64],
) -> Result<Option<Vec<f64>>> {
    let domain = billiard.domain();
    let dx = Vec2::new(delta0, 0.0);
    let plus = ParticleState::new(state.position + dx, state.velocity);
    let minus = ParticleState::new(state.position - dx, state.velocity);
    for s in [&plus, &minus] {
        if !domain.is_interior(s.position) {
            return Err(Error::BadInitialCondition(format!(
                "finite-difference partner at ({}, {}) lies outside the domain",
                s.position.x, s.position.y
            )));
        }
    }
    let a = billiard.evolve(plus, duration, times)?;
    let b = billiard.evolve(minus, duration, times)?;
    if !a.is_complete() || !b.is_complete() || !billiard.same_itinerary(&a.collisions, &b.collisions) {
        return Ok(None);
    }
    let d0 = plus.position.x - minus.position.x;
    Ok(Some(a.positions.iter().zip(&b.positions).map(|(p, q)| (p.x - q.x) / d0).collect()))
}

/// Single-trajectory bracket `{x(t), p_x(0)}` at time `t`.
pub fn poisson_bracket_xp(state: ParticleState, t: f64, delta0: f64, domain: &BilliardDomain) -> Result<f64> {
    if !(delta0 > 0.0) {
        return Err(Error::InvalidArgument(format!("delta0 must be > 0, got {delta0}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let billiard = Billiard::new(domain);
    bracket_series(&billiard, state, delta0, t, &[t])?
        .map(|v| v[0])
        .ok_or_else(|| Error::GeometryLeak("partner trajectories separated at a corner".into()))
}

/// Ensemble averages of the squared bracket and of its logarithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOtocSeries {
    pub times: Vec<f64>,
    pub c_cl: Vec<f64>,
    pub c_cl_stderr: Vec<f64>,
    pub l_cl: Vec<f64>,
    pub l_cl_stderr: Vec<f64>,
    pub valid_samples: usize,
    pub invalid_samples: usize,
}

fn mean_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / nf).sqrt())
}

/// Classical OTOC over the Wigner ensemble at the sorted, non-negative `times`.
pub fn classical_otoc(
    spec: &WignerEnsembleSpec,
    domain: &BilliardDomain,
    times: &[f64],
) -> Result<ClassicalOtocSeries> {
    if spec.n_samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {}", spec.n_samples)));
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) || times[0] < 0.0 {
        return Err(Error::InvalidArgument("times must be sorted and non-negative".into()));
    }
    let duration = times[times.len() - 1].max(f64::MIN_POSITIVE) * (1.0 + 1e-12) + 1e-12;
    let states = sample_wigner(spec, domain, spec.delta0)?;
    let billiard = Billiard::new(domain);
    let series: Vec<Option<Vec<f64>>> = states
        .par_iter()
        .map(|&s| bracket_series(&billiard, s, spec.delta0, duration, times))
        .collect::<Result<_>>()?;

    let invalid = series.iter().filter(|s| s.is_none()).count();
    if invalid as f64 > MAX_INVALID_FRACTION * spec.n_samples as f64 {
        return Err(Error::TooManyInvalidSamples { invalid, total: spec.n_samples });
    }
    let m = times.len();
    let (mut s1, mut s2, mut l1, mut l2) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for b in series.iter().flatten() {
        for (k, &x) in b.iter().enumerate() {
            let c = x * x;
            let l = c.max(f64::MIN_POSITIVE).ln();
            s1[k] += c;
            s2[k] += c * c;
            l1[k] += l;
            l2[k] += l * l;
        }
    }
    let n = spec.n_samples - invalid;
    let mut out = ClassicalOtocSeries {
        times: times.to_vec(),
        c_cl: Vec::with_capacity(m),
        c_cl_stderr: Vec::with_capacity(m),
        l_cl: Vec::with_capacity(m),
        l_cl_stderr: Vec::with_capacity(m),
        valid_samples: n,
        invalid_samples: invalid,
    };
    for k in 0..m {
        let (c, ce) = mean_stderr(s1[k], s2[k], n);
        let (l, le) = mean_stderr(l1[k], l2[k], n);
        out.c_cl.push(c);
        out.c_cl_stderr.push(ce);
        out.l_cl.push(l);
        out.l_cl_stderr.push(le);
    }
    Ok(out)
}
