//! Lowest eigenpairs of the pencil `K v = lambda M v`.
//!
//! The spectrum is cut into windows whose eigenvalue counts are known
//! exactly from the inertia of `K - s M`. Each window is solved by
//! shift-invert Lanczos centered in the window, with full
//! M-reorthogonalization and restarts deflated against converged vectors,
//! until the inertia count is met. A last inverse-iteration step on `K`
//! and a Rayleigh-Ritz pass over all windows polish the basis.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::skyline::{rcm_ordering, EnvelopeLdl};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EigenOptions {
    /// Target number of eigenvalues per window.
    pub window: usize,
    /// Ritz convergence threshold, relative to the Ritz value.
    pub tol: f64,
    /// Restarts allowed per window before giving up.
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { window: 80, tol: 1e-12, max_restarts: 12, seed: 0x5eed }
    }
}

/// Eigenpairs in ascending order; columns are M-orthonormal.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Number of pencil eigenvalues strictly below `shift`.
pub fn count_below(k: &CsrMatrix, m: &CsrMatrix, perm: &[usize], shift: f64) -> Result<usize> {
    Ok(EnvelopeLdl::factor(&k.axpy_same_pattern(-shift, m), perm)?.negative_pivots())
}

/// Lowest `n` eigenpairs with default options.
pub fn solve_lowest(k: &CsrMatrix, m: &CsrMatrix, n: usize) -> Result<EigenPairs> {
    solve_lowest_with(k, m, n, &EigenOptions::default())
}

pub fn solve_lowest_with(k: &CsrMatrix, m: &CsrMatrix, n: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let dim = k.dim();
    if m.dim() != dim {
        return Err(Error::InvalidArgument("K and M dimensions differ".into()));
    }
    if n == 0 {
        return Ok(EigenPairs { values: Vec::new(), vectors: DMatrix::zeros(dim, 0) });
    }
    if 4 * n >= dim {
        return Err(Error::InvalidArgument(format!(
            "requested {n} eigenpairs but the accuracy guard allows fewer than {} for dimension {dim}",
            dim.div_ceil(4)
        )));
    }
    let perm = rcm_ordering(k);
    // 1^T M 1 approximates the area; Weyl gives N(lambda) ~ area lambda / (4 pi).
    let mass: f64 = m.vals.iter().sum();
    let mut density = mass / (4.0 * std::f64::consts::PI);

    let mut values: Vec<f64> = Vec::with_capacity(n + opts.window);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n + opts.window);
    let mut lo = 0.0;
    let mut count_lo = count_below(k, m, &perm, lo)?;
    if count_lo != 0 {
        return Err(Error::Factorization("stiffness matrix is not positive definite".into()));
    }
    let mut window_index = 0u64;
    while values.len() < n {
        let want = opts.window.min(n - values.len() + opts.window / 4).max(1);
        let mut hi = lo + want as f64 / density;
        let mut count_hi = count_below(k, m, &perm, hi)?;
        for _ in 0..30 {
            let got = count_hi - count_lo;
            if got == 0 {
                hi = lo + 2.0 * (hi - lo);
            } else if got > 2 * opts.window {
                hi = lo + (hi - lo) * (opts.window as f64 / got as f64);
            } else {
                break;
            }
            count_hi = count_below(k, m, &perm, hi)?;
        }
        let needed = count_hi - count_lo;
        if needed == 0 || needed > 2 * opts.window {
            return Err(Error::NoConvergence { converged: values.len(), requested: n });
        }
        let (wv, wx) = solve_window(k, m, &perm, lo, hi, needed, opts, window_index).map_err(|e| match e {
            Error::NoConvergence { converged, .. } => {
                Error::NoConvergence { converged: values.len() + converged, requested: n }
            }
            other => other,
        })?;
        values.extend(wv);
        vectors.extend(wx);
        density = count_hi as f64 / hi;
        lo = hi;
        count_lo = count_hi;
        window_index += 1;
    }

    // One step of inverse iteration on K damps components outside the span.
    let stiff = EnvelopeLdl::factor(k, &perm)?;
    let vectors: Vec<Vec<f64>> = vectors
        .par_iter()
        .map_init(Vec::new, |work, x| {
            let mut y = vec![0.0; dim];
            m.mul_vec(x, &mut y);
            stiff.solve_in_place(&mut y, work);
            y
        })
        .collect();
    let (values, mut vectors) = rayleigh_ritz(k, m, &vectors)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order.truncate(n);
    let mut out = DMatrix::zeros(dim, n);
    let mut vals = Vec::with_capacity(n);
    for (c, &i) in order.iter().enumerate() {
        let v = &mut vectors[i];
        fix_sign(v);
        out.column_mut(c).copy_from_slice(v);
        vals.push(values[i]);
    }
    Ok(EigenPairs { values: vals, vectors: out })
}

/// Rayleigh-Ritz on the span of the window solutions. Restores
/// M-orthonormality across windows and separates close pairs that the
/// windows returned mixed.
fn rayleigh_ritz(k: &CsrMatrix, m: &CsrMatrix, vectors: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (dim, n) = (k.dim(), vectors.len());
    let v = DMatrix::from_fn(dim, n, |i, j| vectors[j][i]);
    let apply = |a: &CsrMatrix| {
        let cols: Vec<Vec<f64>> = vectors
            .par_iter()
            .map(|x| {
                let mut y = vec![0.0; dim];
                a.mul_vec(x, &mut y);
                y
            })
            .collect();
        DMatrix::from_fn(dim, n, |i, j| cols[j][i])
    };
    let sym = |a: DMatrix<f64>| (&a + a.transpose()) * 0.5;
    let kr = sym(v.tr_mul(&apply(k)));
    let mr = sym(v.tr_mul(&apply(m)));
    let l = mr.cholesky().ok_or_else(|| Error::Factorization("window solutions are linearly dependent".into()))?.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Factorization("singular Gram factor".into()))?;
    let eig = SymmetricEigen::new(sym(&linv * kr * linv.transpose()));
    let rotated = v * (linv.transpose() * eig.eigenvectors);
    let out = (0..n).map(|j| rotated.column(j).iter().copied().collect()).collect();
    Ok((eig.eigenvalues.iter().copied().collect(), out))
}

/// Make the largest-magnitude entry positive (first one on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best * (1.0 + 1e-12) {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// All `needed` eigenpairs in `[lo, hi)`.
#[allow(clippy::too_many_arguments)]
fn solve_window(
    k: &CsrMatrix,
    m: &CsrMatrix,
    perm: &[usize],
    lo: f64,
    hi: f64,
    needed: usize,
    opts: &EigenOptions,
    window_index: u64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = k.dim();
    let sigma = 0.5 * (lo + hi);
    let fac = EnvelopeLdl::factor(&k.axpy_same_pattern(-sigma, m), perm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(window_index);
    let mut work = Vec::with_capacity(dim);

    // Locked pairs: value, vector, M * vector.
    let mut locked: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    let max_steps = (3 * needed + 60).min(dim);
    for _attempt in 0..opts.max_restarts {
        if locked.len() >= needed {
            break;
        }
        let mut q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut mbasis: Vec<Vec<f64>> = Vec::new();
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        // Deflate and normalize the start vector.
        let mut mq = m.apply(&q);
        for _ in 0..2 {
            for (_, x, mx) in &locked {
                let c = dot(mx, &q);
                axpy(-c, x, &mut q);
            }
            mq = m.apply(&q);
        }
        let nq = dot(&q, &mq).sqrt();
        if !(nq > 0.0) {
            break;
        }
        q.iter_mut().for_each(|x| *x /= nq);
        mq.iter_mut().for_each(|x| *x /= nq);

        let mut accepted: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut check_every = 10;
        loop {
            let j = basis.len();
            basis.push(q.clone());
            mbasis.push(mq.clone());
            let mut w = mq.clone();
            fac.solve_in_place(&mut w, &mut work);
            let a = dot(&mq, &w);
            alpha.push(a);
            axpy(-a, &q, &mut w);
            if j > 0 {
                axpy(-beta[j - 1], &basis[j - 1], &mut w);
            }
            for _ in 0..2 {
                for (x, mx) in basis.iter().zip(&mbasis) {
                    let c = dot(mx, &w);
                    axpy(-c, x, &mut w);
                }
                for (_, x, mx) in &locked {
                    let c = dot(mx, &w);
                    axpy(-c, x, &mut w);
                }
            }
            let mw = m.apply(&w);
            let b = dot(&w, &mw).max(0.0).sqrt();
            let steps = basis.len();
            let breakdown = !(b > 1e-300) || b < 1e-14 * a.abs();
            let at_cap = steps >= max_steps || locked.len() + steps >= dim;
            let should_check = breakdown || at_cap || (steps + locked.len() >= needed && (steps % check_every == 0));
            if should_check {
                let ritz = ritz_in_window(&alpha, &beta, b, sigma, lo, hi, opts.tol);
                let have = ritz.iter().filter(|r| r.converged).count();
                if have + locked.len() >= needed || breakdown || at_cap {
                    for r in ritz.into_iter().filter(|r| r.converged) {
                        let mut x = vec![0.0; dim];
                        for (c, v) in r.coeffs.iter().zip(&basis) {
                            axpy(*c, v, &mut x);
                        }
                        accepted.push((r.lambda, x));
                    }
                    break;
                }
                check_every = 5;
            }
            q = w;
            mq = mw;
            q.iter_mut().for_each(|x| *x /= b);
            mq.iter_mut().for_each(|x| *x /= b);
            beta.push(b);
        }
        for (_, mut x) in accepted {
            // Re-orthogonalize against what is locked and renormalize in M.
            for _ in 0..2 {
                for (_, y, my) in &locked {
                    let c = dot(my, &x);
                    axpy(-c, y, &mut x);
                }
            }
            let mut mx = m.apply(&x);
            let nx = dot(&x, &mx).sqrt();
            if !(nx > 0.5) {
                continue;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            mx.iter_mut().for_each(|v| *v /= nx);
            let kx = k.apply(&x);
            locked.push((dot(&x, &kx), x, mx));
        }
    }
    if locked.len() != needed {
        return Err(Error::NoConvergence { converged: locked.len(), requested: needed });
    }
    Ok(locked.into_iter().map(|(l, x, _)| (l, x)).unzip())
}

struct Ritz {
    lambda: f64,
    coeffs: Vec<f64>,
    converged: bool,
}

fn ritz_in_window(alpha: &[f64], beta: &[f64], b_last: f64, sigma: f64, lo: f64, hi: f64, tol: f64) -> Vec<Ritz> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut out = Vec::new();
    for i in 0..m {
        let theta = eig.eigenvalues[i];
        if theta == 0.0 {
            continue;
        }
        let lambda = sigma + 1.0 / theta;
        if lambda < lo || lambda >= hi {
            continue;
        }
        let s = eig.eigenvectors.column(i);
        let resid = (b_last * s[m - 1]).abs();
        out.push(Ritz { lambda, coeffs: s.iter().copied().collect(), converged: resid <= tol * theta.abs() });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Diagonal pencil with known spectrum and a few exact degeneracies.
    fn diag_pencil(vals: &[f64]) -> (CsrMatrix, CsrMatrix) {
        let rows: Vec<Vec<usize>> = (0..vals.len()).map(|i| vec![i]).collect();
        let mut k = CsrMatrix::from_pattern(&rows);
        let mut m = CsrMatrix::from_pattern(&rows);
        for (i, &v) in vals.iter().enumerate() {
            let w = 1.0 + 0.1 * (i % 3) as f64;
            k.add(i, i, v * w);
            m.add(i, i, w);
        }
        (k, m)
    }

    #[test]
    fn finds_degenerate_eigenvalues() {
        let mut vals: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        vals[10] = vals[11];
        vals[40] = vals[41];
        vals[42] = vals[41];
        let (k, m) = diag_pencil(&vals);
        let opts = EigenOptions { window: 12, ..Default::default() };
        let ep = solve_lowest_with(&k, &m, 45, &opts).unwrap();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        for (a, b) in ep.values.iter().zip(&sorted) {
            assert!((a - b).abs() < 1e-9 * b, "{a} vs {b}");
        }
        let g = ep.vectors.transpose() * dense(&m) * &ep.vectors;
        assert!((g - DMatrix::identity(45, 45)).amax() < 1e-10);
    }

    fn dense(a: &CsrMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(a.dim(), a.dim(), |i, j| a.get(i, j))
    }

    #[test]
    fn guard_rejects_large_requests() {
        let (k, m) = diag_pencil(&(1..=20).map(|i| i as f64).collect::<Vec<_>>());
        assert!(solve_lowest(&k, &m, 5).is_err());
        assert!(solve_lowest(&k, &m, 4).is_ok());
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.5];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.5]);
    }
}
