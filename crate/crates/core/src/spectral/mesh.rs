use std::collections::HashSet;

use spade::handles::FixedVertexHandle;
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, RefinementParameters, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{BilliardDomain, BoundarySegment, Vec2};

/// Smallest interior angle requested from the refiner.
pub const MIN_ANGLE_DEG: f64 = 25.0;

/// Conforming linear triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Vec2>,
    /// Counterclockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// For boundary nodes, the indices of the domain segments they lie on.
    pub node_segments: Vec<Vec<usize>>,
    pub h: f64,
}

/// Summary of mesh quality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshQuality {
    pub min_angle_deg: f64,
    pub min_area: f64,
    pub max_edge: f64,
    pub total_area: f64,
}

fn tri_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * (b - a).cross(c - a)
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        tri_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn quality(&self) -> MeshQuality {
        let mut q = MeshQuality { min_angle_deg: 180.0, min_area: f64::INFINITY, max_edge: 0.0, total_area: 0.0 };
        for (t, tri) in self.triangles.iter().enumerate() {
            let p = tri.map(|i| self.nodes[i]);
            let area = self.triangle_area(t);
            q.min_area = q.min_area.min(area);
            q.total_area += area;
            for k in 0..3 {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let (u, v) = (b - a, c - a);
                let ang = u.cross(v).atan2(u.dot(v)).abs().to_degrees();
                q.min_angle_deg = q.min_angle_deg.min(ang);
                q.max_edge = q.max_edge.max(u.norm());
            }
        }
        q
    }

    /// Check the structural invariants: positive areas, every node used,
    /// boundary nodes within `h^2` of the boundary.
    pub fn validate(&self, domain: &BilliardDomain) -> Result<()> {
        let mut used = vec![false; self.nodes.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            if !(self.triangle_area(t) > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} has non-positive area")));
            }
            for &i in tri {
                used[i] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Mesh(format!("node {i} is not used by any triangle")));
        }
        for (i, &b) in self.boundary.iter().enumerate() {
            if b && domain.distance_to_boundary(self.nodes[i]) > self.h * self.h {
                return Err(Error::Mesh(format!("boundary node {i} is off the boundary")));
            }
        }
        Ok(())
    }

    /// Sorted node adjacency, each row including the node itself.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<Vec<usize>> = (0..self.nodes.len()).map(|i| vec![i]).collect();
        for tri in &self.triangles {
            for &a in tri {
                for &b in tri {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        adj
    }
}

fn min_feature(domain: &BilliardDomain) -> f64 {
    domain
        .segments()
        .iter()
        .map(|s| match *s {
            BoundarySegment::Line { .. } => s.length(),
            BoundarySegment::Arc { radius, .. } => radius.min(s.length()),
        })
        .fold(f64::INFINITY, f64::min)
}

/// Triangulate `domain` with target element size `h`.
///
/// `h` is the largest edge length. The boundary is replaced by a polyline
/// with chords of length at most `h` (arc sagitta at most `h^2 / (8 r)`);
/// nodes created on curved parts are projected back onto the arcs.
/// Triangle angles are at least [`MIN_ANGLE_DEG`].
pub fn generate_mesh(domain: &BilliardDomain, h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Mesh(format!("mesh size must be positive, got {h}")));
    }
    let feature = min_feature(domain);
    if h >= feature {
        return Err(Error::Mesh(format!("h = {h} is not below the smallest boundary feature {feature}")));
    }

    // Boundary polyline with the owning segment of every chord.
    let mut points: Vec<spade::Point2<f64>> = Vec::new();
    let mut chords: Vec<(Vec2, Vec2, usize)> = Vec::new();
    for (si, seg) in domain.segments().iter().enumerate() {
        let pts = seg.sample(h);
        for w in pts.windows(2) {
            chords.push((w[0], w[1], si));
        }
        for p in &pts[..pts.len() - 1] {
            points.push(spade::Point2::new(p.x, p.y));
        }
    }
    let n_b = points.len();
    let edges: Vec<[usize; 2]> = (0..n_b).map(|i| [i, (i + 1) % n_b]).collect();

    // The refiner leaves a few faces above the bounds; split their long
    // edges by hand and refine again until no edge exceeds h.
    let max_area = 3f64.sqrt() / 8.0 * h * h;
    let mut cdt = ConstrainedDelaunayTriangulation::<spade::Point2<f64>>::bulk_load_cdt(points, edges)
        .map_err(|e| Error::Mesh(format!("triangulation failed: {e:?}")))?;
    let expected = (2.0 * domain.area() / max_area) as usize + 10 * n_b;
    let mut attempt = 0;
    let excluded = loop {
        let result = cdt.refine(
            RefinementParameters::<f64>::new()
                .exclude_outer_faces(true)
                .with_angle_limit(AngleLimit::from_deg(MIN_ANGLE_DEG))
                .with_max_allowed_area(max_area)
                .with_max_additional_vertices(4 * expected),
        );
        if !result.refinement_complete {
            return Err(Error::Mesh("mesh refinement did not complete".into()));
        }
        let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();
        let mut splits: Vec<spade::Point2<f64>> = Vec::new();
        for f in cdt.inner_faces().filter(|f| !excluded.contains(&f.fix())) {
            for e in f.adjacent_edges() {
                if e.length_2() > h * h * (1.0 + 1e-12) && !cdt.is_constraint_edge(e.as_undirected().fix()) {
                    let [a, b] = e.positions();
                    splits.push(spade::Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
                }
            }
        }
        if splits.is_empty() {
            break excluded;
        }
        attempt += 1;
        if attempt > 20 {
            return Err(Error::Mesh(format!("could not bring edges below h = {h}")));
        }
        for p in splits {
            cdt.insert(p).map_err(|e| Error::Mesh(format!("insertion failed: {e:?}")))?;
        }
    };

    let mut index = vec![usize::MAX; cdt.num_vertices()];
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    let mut node_of = |v: FixedVertexHandle, nodes: &mut Vec<Vec2>| {
        let k = v.index();
        if index[k] == usize::MAX {
            let p = cdt.vertex(v).position();
            index[k] = nodes.len();
            nodes.push(Vec2::new(p.x, p.y));
        }
        index[k]
    };
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let vs = face.vertices().map(|v| v.fix());
        let tri = [node_of(vs[0], &mut nodes), node_of(vs[1], &mut nodes), node_of(vs[2], &mut nodes)];
        triangles.push(tri);
    }
    if triangles.is_empty() {
        return Err(Error::Mesh("no interior triangles".into()));
    }

    let mut boundary = vec![false; nodes.len()];
    let mut node_segments: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for edge in cdt.undirected_edges() {
        if !cdt.is_constraint_edge(edge.fix()) {
            continue;
        }
        let [a, b] = edge.vertices().map(|v| v.fix().index());
        let (ia, ib) = (index[a], index[b]);
        if ia == usize::MAX || ib == usize::MAX {
            continue;
        }
        let (pa, pb) = (nodes[ia], nodes[ib]);
        let mid = (pa + pb) * 0.5;
        let owner = chords
            .iter()
            .map(|&(u, v, s)| (point_chord_distance(mid, u, v), s))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .map(|(_, s)| s)
            .expect("boundary has chords");
        for i in [ia, ib] {
            boundary[i] = true;
            if !node_segments[i].contains(&owner) {
                node_segments[i].push(owner);
            }
        }
    }
    for s in &mut node_segments {
        s.sort_unstable();
    }
    // Refinement splits boundary chords at their midpoints; put such nodes
    // back onto the curved boundary.
    let segs = domain.segments();
    for (p, owners) in nodes.iter_mut().zip(&node_segments) {
        if let [only] = owners[..] {
            if segs[only].is_arc() {
                *p = segs[only].closest_point(*p);
            }
        }
    }
    // Spade reports faces counterclockwise already; keep the invariant explicit.
    for tri in &mut triangles {
        if tri_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
    }
    Ok(Mesh { nodes, triangles, boundary, node_segments, h })
}

fn point_chord_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
    p.distance(a + d * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use std::f64::consts::PI;

    #[test]
    fn unit_square_h01() {
        let d = BilliardDomain::from_polygon(&presets::unit_square());
        let m = generate_mesh(&d, 0.1).unwrap();
        m.validate(&d).unwrap();
        let q = m.quality();
        assert!((q.total_area - 1.0).abs() < 1e-12);
        assert!(q.min_angle_deg >= 20.0, "{q:?}");
        assert!((200..=800).contains(&m.num_triangles()), "{}", m.num_triangles());
        assert!(q.max_edge <= 0.1 + 1e-12);
        assert!(m.boundary.iter().filter(|&&b| b).count() >= 40);
    }

    #[test]
    fn h_too_large() {
        let d = BilliardDomain::from_polygon(&presets::rectangle(2.0, 0.5));
        assert!(matches!(generate_mesh(&d, 0.6), Err(Error::Mesh(_))));
    }

    #[test]
    fn disk_boundary_nodes_on_circle() {
        let d = BilliardDomain::new(
            (0..4).map(|k| BoundarySegment::arc(Vec2::ZERO, 1.0, k as f64 * PI / 2.0, PI / 2.0)).collect(),
        )
        .unwrap();
        let m = generate_mesh(&d, 0.05).unwrap();
        for (p, &b) in m.nodes.iter().zip(&m.boundary) {
            if b {
                assert!((p.norm() - 1.0).abs() < 3e-4, "{}", p.norm());
            }
        }
        assert!(m.quality().min_angle_deg >= 20.0);
    }

    #[test]
    fn corner_nodes_carry_both_segments() {
        let d = BilliardDomain::from_polygon(&presets::unit_square());
        let m = generate_mesh(&d, 0.25).unwrap();
        let origin = m.nodes.iter().position(|p| p.norm() < 1e-15).unwrap();
        assert_eq!(m.node_segments[origin], vec![0, 3]);
    }
}
