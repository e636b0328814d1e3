//! Quarter-domain solves for billiards with both reflection symmetries.
//!
//! Odd parity under `x -> -x` is a Dirichlet condition on the `x = 0` cut,
//! even parity a natural (Neumann) one; likewise for `y`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::assemble::assemble_with;
use super::basis::{EigenBasis, Sector};
use super::eigen::{fix_sign, solve_lowest_with, EigenOptions};
use super::mesh::{generate_mesh, Mesh};
use crate::error::Result;
use crate::geometry::{symmetry_quadrant, BilliardDomain, CutAxis};

/// First-quadrant mesh with cut nodes snapped onto the axes and only wall
/// nodes flagged as boundary.
pub fn quarter_mesh(domain: &BilliardDomain, h: f64) -> Result<Mesh> {
    let q = symmetry_quadrant(domain)?;
    let mut mesh = generate_mesh(&q.domain, h)?;
    for i in 0..mesh.num_nodes() {
        let mut wall = false;
        for &s in &mesh.node_segments[i] {
            match q.cut_axis(s) {
                Some(CutAxis::Y) => mesh.nodes[i].x = 0.0,
                Some(CutAxis::X) => mesh.nodes[i].y = 0.0,
                None => wall = true,
            }
        }
        mesh.boundary[i] = wall;
    }
    Ok(mesh)
}

/// Solve the four parity sectors on the quarter domain and merge them.
///
/// The merged list is cut at the lowest sector maximum, so it holds every
/// state below that level. Use [`EigenBasis::unfold`] for nodal values on
/// the whole domain.
pub fn symmetry_sector_solve(domain: &BilliardDomain, h: f64, n_per_sector: usize) -> Result<EigenBasis> {
    symmetry_sector_solve_with(domain, h, n_per_sector, 1.0, &EigenOptions::default())
}

pub fn symmetry_sector_solve_with(
    domain: &BilliardDomain,
    h: f64,
    n_per_sector: usize,
    hbar: f64,
    opts: &EigenOptions,
) -> Result<EigenBasis> {
    let quarter = quarter_mesh(domain, h)?;
    let solved: Vec<(Sector, Result<_>)> = Sector::ALL
        .par_iter()
        .map(|&sector| {
            let a = assemble_with(&quarter, &sector.dirichlet(&quarter));
            (sector, solve_lowest_with(&a.k, &a.m, n_per_sector, opts).map(|p| (a, p)))
        })
        .collect();

    let mut states: Vec<(f64, Sector, Vec<f64>)> = Vec::new();
    let mut ceiling = f64::INFINITY;
    for (sector, res) in solved {
        let (a, pairs) = res?;
        if let Some(&top) = pairs.values.last() {
            ceiling = ceiling.min(top);
        }
        for (c, &lambda) in pairs.values.iter().enumerate() {
            let mut v = a.expand(pairs.vectors.column(c).as_slice());
            fix_sign(&mut v);
            states.push((lambda, sector, v));
        }
    }
    states.retain(|s| s.0 <= ceiling);
    states.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.code().cmp(&b.1.code())));

    let mut vectors = DMatrix::zeros(quarter.num_nodes(), states.len());
    for (c, s) in states.iter().enumerate() {
        vectors.column_mut(c).copy_from_slice(&s.2);
    }
    Ok(EigenBasis {
        hbar,
        lambdas: states.iter().map(|s| s.0).collect(),
        vectors,
        mesh: Arc::new(quarter),
        sectors: Some(states.iter().map(|s| s.1).collect()),
        domain_hash: domain.content_hash(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use crate::spectral::{solve_on_mesh, Parity};
    use std::f64::consts::PI;

    #[test]
    fn centered_square_sector_ground_states() {
        let d = BilliardDomain::from_polygon(&presets::centered_square(1.0));
        let b = symmetry_sector_solve(&d, 0.03, 6).unwrap();
        let secs = b.sectors.as_ref().unwrap();
        let lowest = |s: Sector| b.lambdas[secs.iter().position(|&x| x == s).unwrap()];
        let dd = Sector { x: Parity::Odd, y: Parity::Odd };
        let nn = Sector { x: Parity::Even, y: Parity::Even };
        assert!((lowest(dd) / (8.0 * PI * PI) - 1.0).abs() < 0.01);
        assert!((lowest(nn) / (2.0 * PI * PI) - 1.0).abs() < 0.01);
        assert_eq!(secs[0], nn);
        let rep = b.hygiene();
        assert!(rep.passes(), "{rep:?}");
        let rep = b.unfold().hygiene();
        assert!(rep.passes(), "{rep:?}");
    }

    #[test]
    fn unfolded_mesh_is_conforming() {
        let d = BilliardDomain::from_polygon(&presets::centered_square(1.0));
        let b = symmetry_sector_solve(&d, 0.1, 2).unwrap().unfold();
        b.mesh.validate(&d).unwrap();
        assert!((b.mesh.quality().total_area - 1.0).abs() < 1e-12);
        let mut edges = std::collections::HashMap::new();
        for t in &b.mesh.triangles {
            for k in 0..3 {
                let (a, c) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(c), a.max(c))).or_insert(0) += 1;
            }
        }
        for (&(a, c), &n) in &edges {
            let on_wall = b.mesh.boundary[a] && b.mesh.boundary[c];
            assert!(n == 2 || (n == 1 && on_wall), "edge {a}-{c} used {n} times");
        }
    }

    #[test]
    fn asymmetric_domain_rejected() {
        let d = BilliardDomain::from_polygon(&presets::asymmetric_triangle());
        assert!(symmetry_sector_solve(&d, 0.1, 2).is_err());
    }

    #[test]
    fn sectors_match_full_solve() {
        let d = BilliardDomain::from_polygon(&presets::centered_square(1.0));
        let s = symmetry_sector_solve(&d, 0.05, 8).unwrap().unfold();
        let f = solve_on_mesh(s.mesh.clone(), s.len(), &EigenOptions::default()).unwrap();
        for (a, b) in s.lambdas.iter().zip(&f.lambdas) {
            assert!((a / b - 1.0).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
