//! Reverse Cuthill-McKee ordering and envelope (skyline) LDL^T factorization
//! of symmetric, possibly indefinite, sparse matrices.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nbrs = Vec::new();
    while order.len() < n {
        // Pseudo-peripheral start: lowest degree among unvisited, then one
        // BFS sweep to its farthest node.
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
        let start = farthest(a, seed, &visited);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            nbrs.clear();
            nbrs.extend(a.row(i).0.iter().copied().filter(|&j| !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn farthest(a: &CsrMatrix, seed: usize, blocked: &[bool]) -> usize {
    let mut level = vec![usize::MAX; a.dim()];
    let mut queue = VecDeque::from([seed]);
    level[seed] = 0;
    let mut last = seed;
    while let Some(i) = queue.pop_front() {
        last = i;
        for &j in a.row(i).0 {
            if !blocked[j] && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    last
}

/// `L D L^T` factor stored row-wise over each row's envelope.
#[derive(Clone, Debug)]
pub struct EnvelopeLdl {
    perm: Vec<usize>,
    /// First column of each row's envelope.
    first: Vec<usize>,
    /// Start of each row in `l`; row `i` stores columns `first[i]..i`.
    start: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
    perturbed: usize,
}

impl EnvelopeLdl {
    /// Factor `a` (symmetric) in the given ordering without pivoting. Pivots
    /// that vanish to rounding are nudged to `+-tiny` and counted.
    pub fn factor(a: &CsrMatrix, perm: &[usize]) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return Err(Error::Factorization("permutation length mismatch".into()));
        }
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &j in a.row(old).0 {
                let c = inv[j];
                if c < first[new] {
                    first[new] = c;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i]));
        }
        let mut l = vec![0.0; start[n]];
        let mut d = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            let (c, v) = a.row(old);
            for (&j, &x) in c.iter().zip(v) {
                let col = inv[j];
                if col < new {
                    l[start[new] + col - first[new]] = x;
                } else if col == new {
                    d[new] = x;
                }
            }
        }
        let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let tiny = 1e-14 * scale;
        let mut perturbed = 0;
        for i in 0..n {
            let fi = first[i];
            let (head, row_i) = l.split_at_mut(start[i]);
            let row_i = &mut row_i[..i - fi];
            // row_i[j - fi] holds A_ij; it becomes G_ij = L_ij D_j while the
            // row is being formed and L_ij once it is complete.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &head[start[j]..start[j] + (j - fj)];
                let mut s = row_i[j - fi];
                let a_seg = &row_i[k0 - fi..j - fi];
                let b_seg = &row_j[k0 - fj..j - fj];
                s -= dot(a_seg, b_seg);
                row_i[j - fi] = s;
            }
            let mut di = d[i];
            for j in fi..i {
                let g = row_i[j - fi];
                let lij = g / d[j];
                di -= g * lij;
                row_i[j - fi] = lij;
            }
            if di.abs() < tiny {
                di = if di < 0.0 { -tiny } else { tiny };
                perturbed += 1;
            }
            if !di.is_finite() {
                return Err(Error::Factorization(format!("non-finite pivot at row {i}")));
            }
            d[i] = di;
        }
        Ok(Self { perm: perm.to_vec(), first, start, l, d, perturbed })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of negative pivots, i.e. eigenvalues of the pencil below the shift.
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn perturbed_pivots(&self) -> usize {
        self.perturbed
    }

    /// Entries stored in the envelope.
    pub fn envelope_size(&self) -> usize {
        self.l.len()
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let n = self.dim();
        work.clear();
        work.extend(self.perm.iter().map(|&o| b[o]));
        let y = work.as_mut_slice();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.l[self.start[i]..self.start[i + 1]];
            y[i] -= dot(row, &y[fi..i]);
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.l[self.start[i]..self.start[i + 1]];
            let yi = y[i];
            for (yk, &lk) in y[fi..i].iter_mut().zip(row) {
                *yk -= lk * yi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}
