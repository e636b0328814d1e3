use rayon::prelude::*;

use super::mesh::Mesh;
use super::sparse::CsrMatrix;
use crate::geometry::Vec2;

/// Element stiffness of `-Laplacian` on one linear triangle.
pub fn element_stiffness(p: [Vec2; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
    // Edge vectors opposite each vertex, rotated: grad phi_i = perp(e_i) / (2A).
    let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = e[i].dot(e[j]) / (4.0 * area);
        }
    }
    k
}

/// Consistent element mass.
pub fn element_mass(p: [Vec2; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// Global matrix from per-element 3x3 blocks, summed in a fixed order.
pub(crate) fn assemble_elements<F>(mesh: &Mesh, pattern: &[Vec<usize>], element: F) -> CsrMatrix
where
    F: Fn([Vec2; 3]) -> [[f64; 3]; 3] + Sync,
{
    let blocks: Vec<[[f64; 3]; 3]> = mesh.triangles.par_iter().map(|t| element(t.map(|i| mesh.nodes[i]))).collect();
    let mut a = CsrMatrix::from_pattern(pattern);
    for (t, blk) in mesh.triangles.iter().zip(&blocks) {
        for i in 0..3 {
            for j in 0..3 {
                a.add(t[i], t[j], blk[i][j]);
            }
        }
    }
    a
}

/// Stiffness and mass on all mesh nodes.
pub fn assemble_full(mesh: &Mesh) -> (CsrMatrix, CsrMatrix) {
    let pattern = mesh.adjacency();
    (assemble_elements(mesh, &pattern, element_stiffness), assemble_elements(mesh, &pattern, element_mass))
}

/// Finite-element pencil with constrained nodes removed.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    /// Mesh node of each free degree of freedom.
    pub dofs: Vec<usize>,
    pub num_nodes: usize,
}

impl Assembled {
    /// Spread a free-dof vector to all mesh nodes (zeros on constrained nodes).
    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes];
        for (&node, &x) in self.dofs.iter().zip(v) {
            out[node] = x;
        }
        out
    }
}

/// Assemble with homogeneous Dirichlet conditions on the flagged nodes.
pub fn assemble_with(mesh: &Mesh, dirichlet: &[bool]) -> Assembled {
    let (k, m) = assemble_full(mesh);
    let dofs: Vec<usize> = (0..mesh.num_nodes()).filter(|&i| !dirichlet[i]).collect();
    Assembled { k: k.submatrix(&dofs), m: m.submatrix(&dofs), dofs, num_nodes: mesh.num_nodes() }
}

/// Assemble the Dirichlet Laplacian: every boundary node is constrained.
pub fn assemble(mesh: &Mesh) -> Assembled {
    assemble_with(mesh, &mesh.boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{presets, BilliardDomain};
    use crate::spectral::generate_mesh;

    #[test]
    fn reference_triangle() {
        let p = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let k = element_stiffness(p);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            assert!(k[i].iter().sum::<f64>().abs() < 1e-15);
            for j in 0..3 {
                assert!((k[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
        let m = element_mass(p);
        let total: f64 = m.iter().flatten().sum();
        assert!((total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mass_sums_to_area() {
        let (spec, _) = presets::butterfly().normalized();
        let d = BilliardDomain::from_polygon(&spec);
        let mesh = generate_mesh(&d, 0.05).unwrap();
        let (k, m) = assemble_full(&mesh);
        assert!(m.vals.iter().all(|&v| v > 0.0));
        assert!((m.vals.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(k.is_symmetric(1e-14) && m.is_symmetric(0.0));
        let ones = vec![1.0; mesh.num_nodes()];
        assert!(k.apply(&ones).iter().all(|v| v.abs() < 1e-10));
        let a = assemble(&mesh);
        assert_eq!(a.k.dim(), mesh.boundary.iter().filter(|b| !**b).count());
    }
}
