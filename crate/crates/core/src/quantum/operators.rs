use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spectral::{assemble_elements, CsrMatrix, EigenBasis, Mesh};

/// Position and momentum matrices in an eigenbasis.
///
/// `p = i * p_factor`; `p_factor` is real antisymmetric.
#[derive(Clone, Debug)]
pub struct OperatorMatrices {
    pub x: DMatrix<f64>,
    /// From `P_nm = i (E_n - E_m) X_nm / hbar`.
    pub p_factor: DMatrix<f64>,
    /// From `P_nm = -i hbar integral psi_n d/dx psi_m`.
    pub p_factor_derivative: DMatrix<f64>,
    pub consistency: PConsistency,
    pub hbar: f64,
}

/// Agreement between the two momentum constructions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PConsistency {
    /// Median of `|P_deriv - P_energy| / |P_energy|` over significant pairs.
    pub median_relative: f64,
    pub pairs: usize,
}

/// Weighted mass `integral x phi_i phi_j`, exact for linear elements.
pub fn x_mass(mesh: &Mesh) -> CsrMatrix {
    assemble_elements(mesh, &mesh.adjacency(), |p| {
        let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                // integral phi_i phi_j phi_k = 2A a! b! c! / (a + b + c + 2)!
                b[i][j] = (0..3)
                    .map(|k| {
                        let w = match (i == j, j == k, i == k) {
                            (true, true, _) => 1.0 / 10.0,
                            (true, false, _) | (false, true, _) | (false, false, true) => 1.0 / 30.0,
                            (false, false, false) => 1.0 / 60.0,
                        };
                        w * area * p[k].x
                    })
                    .sum();
            }
        }
        b
    })
}

/// `integral phi_i d/dx phi_j`.
pub fn x_derivative(mesh: &Mesh) -> CsrMatrix {
    assemble_elements(mesh, &mesh.adjacency(), |p| {
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
        let mut b = [[0.0; 3]; 3];
        for row in &mut b {
            for j in 0..3 {
                row[j] = -e[j].y / 6.0;
            }
        }
        b
    })
}

/// `V^T S V` without forming `S V` in full.
pub fn project_operator(v: &DMatrix<f64>, s: &CsrMatrix) -> DMatrix<f64> {
    const CHUNK: usize = 64;
    let (rows, n) = v.shape();
    let mut out = DMatrix::zeros(n, n);
    for c0 in (0..n).step_by(CHUNK) {
        let w = CHUNK.min(n - c0);
        let mut sv = DMatrix::zeros(rows, w);
        let cols: Vec<Vec<f64>> = (0..w).into_par_iter().map(|j| s.apply(v.column(c0 + j).as_slice())).collect();
        for (j, col) in cols.iter().enumerate() {
            sv.column_mut(j).copy_from_slice(col);
        }
        out.columns_mut(c0, w).copy_from(&v.tr_mul(&sv));
    }
    out
}

/// Zero the entries of an `x`-odd operator that parity forbids.
///
/// On a quarter basis the four reflected copies add up to the quarter
/// integral when the `x` parities differ and the `y` parities agree, and
/// cancel otherwise.
fn apply_x_odd_rule(basis: &EigenBasis, m: &mut DMatrix<f64>) {
    if let Some(secs) = &basis.sectors {
        for j in 0..secs.len() {
            for i in 0..secs.len() {
                if secs[i].x == secs[j].x || secs[i].y != secs[j].y {
                    m[(i, j)] = 0.0;
                }
            }
        }
    }
}

/// Build `X` and both forms of `P` on the basis.
pub fn build_operator_matrices(basis: &EigenBasis) -> OperatorMatrices {
    let x_raw = project_operator(&basis.vectors, &x_mass(&basis.mesh));
    let mut x = (&x_raw + x_raw.transpose()) * 0.5;
    let mut d = project_operator(&basis.vectors, &x_derivative(&basis.mesh));
    apply_x_odd_rule(basis, &mut x);
    apply_x_odd_rule(basis, &mut d);
    let hbar = basis.hbar;
    let e = basis.energies();
    let n = basis.len();
    let p_factor = DMatrix::from_fn(n, n, |i, j| (e[i] - e[j]) * x[(i, j)] / hbar);
    let p_factor_derivative = d * (-hbar);
    let consistency = p_consistency(&p_factor, &p_factor_derivative);
    OperatorMatrices { x, p_factor, p_factor_derivative, consistency, hbar }
}

/// Median relative discrepancy over pairs with `|P| >= 1e-3 max |P|`.
pub fn p_consistency(energy: &DMatrix<f64>, deriv: &DMatrix<f64>) -> PConsistency {
    let max = energy.amax();
    let mut rel = Vec::new();
    for j in 0..energy.ncols() {
        for i in 0..j {
            let e = energy[(i, j)];
            if e.abs() >= 1e-3 * max && e != 0.0 {
                rel.push((deriv[(i, j)] - e).abs() / e.abs());
            }
        }
    }
    let pairs = rel.len();
    if pairs == 0 {
        return PConsistency { median_relative: f64::NAN, pairs };
    }
    rel.sort_by(f64::total_cmp);
    let median = if pairs % 2 == 1 { rel[pairs / 2] } else { 0.5 * (rel[pairs / 2 - 1] + rel[pairs / 2]) };
    PConsistency { median_relative: median, pairs }
}

impl OperatorMatrices {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// Leading `n x n` blocks.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.dim());
        let cut = |m: &DMatrix<f64>| m.view((0, 0), (n, n)).into_owned();
        let p_factor = cut(&self.p_factor);
        let p_factor_derivative = cut(&self.p_factor_derivative);
        let consistency = p_consistency(&p_factor, &p_factor_derivative);
        Self { x: cut(&self.x), p_factor, p_factor_derivative, consistency, hbar: self.hbar }
    }

    /// The same matrices at another `hbar`; both momentum forms scale linearly.
    pub fn with_hbar(&self, hbar: f64) -> Self {
        let s = hbar / self.hbar;
        Self {
            x: self.x.clone(),
            p_factor: &self.p_factor * s,
            p_factor_derivative: &self.p_factor_derivative * s,
            consistency: self.consistency,
            hbar,
        }
    }

    /// Matrices from a given `X` and spectrum; the derivative form is set
    /// equal to the energy form.
    pub fn from_x(x: DMatrix<f64>, energies: &[f64], hbar: f64) -> Self {
        let n = x.nrows();
        let p_factor = DMatrix::from_fn(n, n, |i, j| (energies[i] - energies[j]) * x[(i, j)] / hbar);
        let consistency = PConsistency { median_relative: 0.0, pairs: 0 };
        Self { x, p_factor_derivative: p_factor.clone(), p_factor, consistency, hbar }
    }
}
