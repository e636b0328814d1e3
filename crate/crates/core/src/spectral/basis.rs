use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::assemble::{assemble, assemble_full};
use super::eigen::{fix_sign, solve_lowest_with, EigenOptions};
use super::mesh::{generate_mesh, Mesh};
use crate::error::{Error, Result};
use crate::geometry::{BilliardDomain, Vec2};

/// Orthonormality tolerance for stored bases.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;
/// Relative residual tolerance for stored bases.
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Behavior under one reflection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// Parities under `x -> -x` and `y -> -y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sector {
    pub x: Parity,
    pub y: Parity,
}

impl Sector {
    pub const ALL: [Sector; 4] = [
        Sector { x: Parity::Odd, y: Parity::Odd },
        Sector { x: Parity::Odd, y: Parity::Even },
        Sector { x: Parity::Even, y: Parity::Odd },
        Sector { x: Parity::Even, y: Parity::Even },
    ];

    pub fn code(self) -> u8 {
        (matches!(self.x, Parity::Odd) as u8) << 1 | matches!(self.y, Parity::Odd) as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        let p = |b: bool| if b { Parity::Odd } else { Parity::Even };
        (c < 4).then(|| Sector { x: p(c & 2 != 0), y: p(c & 1 != 0) })
    }

    /// Sign picked up under the reflection `(x, y) -> (sx x, sy y)`.
    pub fn sign(self, sx: f64, sy: f64) -> f64 {
        let f = |p: Parity, s: f64| if p == Parity::Odd { s } else { 1.0 };
        f(self.x, sx) * f(self.y, sy)
    }

    /// Homogeneous Dirichlet nodes of this sector on a quarter mesh.
    pub fn dirichlet(self, quarter: &Mesh) -> Vec<bool> {
        quarter
            .nodes
            .iter()
            .zip(&quarter.boundary)
            .map(|(p, &wall)| wall || (p.x == 0.0 && self.x == Parity::Odd) || (p.y == 0.0 && self.y == Parity::Odd))
            .collect()
    }
}

/// The four reflections of the first quadrant, in unfolding order.
pub const QUADRANT_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];

impl fmt::Display for Sector {
    /// Boundary conditions on the `x = 0` cut then the `y = 0` cut
    /// (`D` for odd, `N` for even).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |p: Parity| if p == Parity::Odd { 'D' } else { 'N' };
        write!(f, "{}{}", c(self.x), c(self.y))
    }
}

/// Eigenstates of the billiard on a fixed mesh.
///
/// `lambdas` are the generalized eigenvalues of `K v = lambda M v`; energies
/// are `hbar^2 lambda / 2`, so one basis serves every `hbar`.
///
/// With `sectors` present the mesh covers the first quadrant only: its
/// `boundary` flags mark wall nodes, nodes on the cuts have a coordinate
/// exactly zero, and each column is normalized on the quadrant. The state on
/// the whole domain is half the parity-signed reflection of the column.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub hbar: f64,
    pub lambdas: Vec<f64>,
    /// Nodal values, one column per state.
    pub vectors: DMatrix<f64>,
    pub mesh: Arc<Mesh>,
    pub sectors: Option<Vec<Sector>>,
    pub domain_hash: [u8; 32],
}

/// Worst-case orthonormality and residual over a basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HygieneReport {
    pub max_orthonormality_error: f64,
    pub max_relative_residual: f64,
    pub states: usize,
}

impl HygieneReport {
    pub fn passes(&self) -> bool {
        self.max_orthonormality_error <= ORTHONORMALITY_TOL && self.max_relative_residual <= RESIDUAL_TOL
    }
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn energy(&self, n: usize) -> f64 {
        0.5 * self.hbar * self.hbar * self.lambdas[n]
    }

    pub fn energies(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.energy(n)).collect()
    }

    /// The same states at another `hbar`.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { hbar, ..self.clone() })
    }

    /// Number of states kept for operator matrices: the top 20% are dropped.
    pub fn reliable_len(&self) -> usize {
        reliable_count(self.len())
    }

    /// First `n` states.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            hbar: self.hbar,
            lambdas: self.lambdas[..n].to_vec(),
            vectors: self.vectors.columns(0, n).into_owned(),
            mesh: self.mesh.clone(),
            sectors: self.sectors.as_ref().map(|s| s[..n].to_vec()),
            domain_hash: self.domain_hash,
        }
    }

    /// Stored on a quarter mesh with parity labels.
    pub fn is_quarter(&self) -> bool {
        self.sectors.is_some()
    }

    /// Sector of state `n`, if any.
    pub fn sector(&self, n: usize) -> Option<Sector> {
        self.sectors.as_ref().map(|s| s[n])
    }

    /// Check M-orthonormality and the pencil residual on free nodes.
    ///
    /// States of different sectors are orthogonal by symmetry and are not
    /// compared.
    pub fn hygiene(&self) -> HygieneReport {
        const CHUNK: usize = 64;
        let (k, m) = assemble_full(&self.mesh);
        let n = self.len();
        let rows = self.vectors.nrows();
        let free: Vec<Vec<bool>> = match &self.sectors {
            None => vec![self.mesh.boundary.iter().map(|b| !b).collect()],
            Some(_) => Sector::ALL.iter().map(|s| s.dirichlet(&self.mesh).iter().map(|b| !b).collect()).collect(),
        };
        let free_of = |c: usize| match self.sector(c) {
            None => &free[0],
            Some(s) => &free[Sector::ALL.iter().position(|&x| x == s).unwrap()],
        };
        let mut orth: f64 = 0.0;
        let mut worst: f64 = 0.0;
        let mut kv = vec![0.0; rows];
        for c0 in (0..n).step_by(CHUNK) {
            let w = CHUNK.min(n - c0);
            let mut mv = DMatrix::zeros(rows, w);
            for j in 0..w {
                let col = self.vectors.column(c0 + j);
                m.mul_vec(col.as_slice(), mv.column_mut(j).as_mut_slice());
                k.mul_vec(col.as_slice(), &mut kv);
                let lambda = self.lambdas[c0 + j];
                let (mut r2, mut m2) = (0.0, 0.0);
                for (i, _) in free_of(c0 + j).iter().enumerate().filter(|(_, &f)| f) {
                    let r = kv[i] - lambda * mv[(i, j)];
                    r2 += r * r;
                    m2 += mv[(i, j)] * mv[(i, j)];
                }
                worst = worst.max(r2.sqrt() / (lambda * m2.sqrt()));
            }
            let gram = self.vectors.tr_mul(&mv);
            for j in 0..w {
                for i in 0..n {
                    if self.sector(i) != self.sector(c0 + j) {
                        continue;
                    }
                    let delta = if i == c0 + j { 1.0 } else { 0.0 };
                    orth = orth.max((gram[(i, j)] - delta).abs());
                }
            }
        }
        HygieneReport { max_orthonormality_error: orth, max_relative_residual: worst, states: n }
    }

    /// The same states with nodal values on the mirrored whole-domain mesh.
    pub fn unfold(&self) -> Self {
        let Some(sectors) = &self.sectors else {
            return self.clone();
        };
        let (full, maps) = mirror_mesh(&self.mesh);
        let mut vectors = DMatrix::zeros(full.num_nodes(), self.len());
        for (c, s) in sectors.iter().enumerate() {
            let q = self.vectors.column(c);
            let mut v = vec![0.0; full.num_nodes()];
            for (map, &(sx, sy)) in maps.iter().zip(&QUADRANT_SIGNS) {
                let f = 0.5 * s.sign(sx, sy);
                for (i, &x) in q.iter().enumerate() {
                    v[map[i]] = f * x;
                }
            }
            fix_sign(&mut v);
            vectors.column_mut(c).copy_from_slice(&v);
        }
        Self {
            hbar: self.hbar,
            lambdas: self.lambdas.clone(),
            vectors,
            mesh: Arc::new(full),
            sectors: None,
            domain_hash: self.domain_hash,
        }
    }
}

/// Whole-domain mesh from four reflections of a quarter mesh, sharing the
/// nodes on the axes, and the whole-mesh index of every quarter node for
/// each reflection in [`QUADRANT_SIGNS`] order. Segment indices of the
/// boundary nodes still refer to the quarter domain.
pub fn mirror_mesh(quarter: &Mesh) -> (Mesh, [Vec<usize>; 4]) {
    let nq = quarter.num_nodes();
    let mut nodes = Vec::with_capacity(4 * nq);
    let mut boundary = Vec::with_capacity(4 * nq);
    let mut node_segments = Vec::with_capacity(4 * nq);
    let mut maps: [Vec<usize>; 4] = Default::default();
    for (c, &(sx, sy)) in QUADRANT_SIGNS.iter().enumerate() {
        let mut map = vec![0; nq];
        for i in 0..nq {
            let p = quarter.nodes[i];
            let shared_x = sx < 0.0 && p.x == 0.0;
            let shared_y = sy < 0.0 && p.y == 0.0;
            map[i] = match (shared_x, shared_y) {
                (true, true) => maps[0][i],
                (true, false) => maps[if sy < 0.0 { 2 } else { 0 }][i],
                (false, true) => maps[if sx < 0.0 { 1 } else { 0 }][i],
                (false, false) => {
                    nodes.push(Vec2::new(sx * p.x, sy * p.y));
                    boundary.push(quarter.boundary[i]);
                    node_segments.push(quarter.node_segments[i].clone());
                    nodes.len() - 1
                }
            };
        }
        maps[c] = map;
    }
    let mut triangles = Vec::with_capacity(4 * quarter.num_triangles());
    for (map, &(sx, sy)) in maps.iter().zip(&QUADRANT_SIGNS) {
        for t in &quarter.triangles {
            let [a, b, d] = t.map(|i| map[i]);
            triangles.push(if sx * sy > 0.0 { [a, b, d] } else { [a, d, b] });
        }
    }
    (Mesh { nodes, triangles, boundary, node_segments, h: quarter.h }, maps)
}

/// Mesh size giving ten nodes per wavelength at `eps = 2E / hbar^2`.
pub fn auto_mesh_size(eps_cutoff: f64) -> f64 {
    2.0 * std::f64::consts::PI / eps_cutoff.sqrt() / 10.0
}

/// Mesh the whole domain and solve for its lowest `n` Dirichlet states.
pub fn solve_basis(domain: &BilliardDomain, h: f64, n: usize, hbar: f64) -> Result<EigenBasis> {
    solve_basis_with(domain, h, n, hbar, &EigenOptions::default())
}

pub fn solve_basis_with(
    domain: &BilliardDomain,
    h: f64,
    n: usize,
    hbar: f64,
    opts: &EigenOptions,
) -> Result<EigenBasis> {
    if !(hbar > 0.0) {
        return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
    }
    let mut b = solve_on_mesh(Arc::new(generate_mesh(domain, h)?), n, opts)?;
    b.hbar = hbar;
    b.domain_hash = domain.content_hash();
    Ok(b)
}

/// Lowest `n` Dirichlet states on a given mesh, at `hbar = 1`.
pub fn solve_on_mesh(mesh: Arc<Mesh>, n: usize, opts: &EigenOptions) -> Result<EigenBasis> {
    let a = assemble(&mesh);
    let pairs = solve_lowest_with(&a.k, &a.m, n, opts)?;
    let mut vectors = DMatrix::zeros(mesh.num_nodes(), n);
    for c in 0..n {
        for (r, &node) in a.dofs.iter().enumerate() {
            vectors[(node, c)] = pairs.vectors[(r, c)];
        }
    }
    Ok(EigenBasis { hbar: 1.0, lambdas: pairs.values, vectors, mesh, sectors: None, domain_hash: [0; 32] })
}

/// States kept after discarding the top 20%.
pub fn reliable_count(n: usize) -> usize {
    n - n / 5
}
