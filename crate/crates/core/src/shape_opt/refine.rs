//! Uniform mesh refinement and short-edge cleanup.

use std::collections::HashMap;

use crate::geometry::Mesh;

/// Edges shorter than this fraction of the bounding-box diagonal are
/// collapsed during cleanup.
pub const SHORT_EDGE_FACTOR: f64 = 1e-4;

/// Result of [`refine`] or [`cleanup`].
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub mesh: Mesh,
    /// True when the cleanup would have broken watertightness and the input
    /// mesh was returned unchanged instead.
    pub rolled_back: bool,
    /// Number of short edges merged by cleanup.
    pub collapsed_edges: usize,
}

/// Splits every face into four at the edge midpoints. Midpoint vertices are
/// shared across faces and material labels are inherited, so watertight
/// inputs stay watertight.
pub fn subdivide(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    let mut materials = Vec::with_capacity(mesh.faces.len() * 4);
    for (j, f) in mesh.faces.iter().enumerate() {
        let mut mid = [0usize; 3];
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            let key = (a.min(b), a.max(b));
            mid[e] = *midpoint.entry(key).or_insert_with(|| {
                let p = nalgebra::center(&vertices[a], &vertices[b]);
                vertices.push(p);
                vertices.len() - 1
            });
        }
        let m = mesh.face_materials[j];
        faces.push([f[0], mid[0], mid[2]]);
        faces.push([f[1], mid[1], mid[0]]);
        faces.push([f[2], mid[2], mid[1]]);
        faces.push(mid);
        materials.extend([m; 4]);
    }
    Mesh {
        vertices,
        faces,
        face_materials: materials,
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Deterministic: lower index wins.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Collapses every edge shorter than [`SHORT_EDGE_FACTOR`] times the
/// bounding-box diagonal by merging its endpoints at their cluster mean, and
/// drops the faces that degenerate. If the result is no longer watertight
/// the input is returned unchanged with `rolled_back` set.
pub fn cleanup(mesh: &Mesh) -> RefineOutcome {
    let threshold = SHORT_EDGE_FACTOR * mesh.bbox_diagonal();
    let short: Vec<(usize, usize)> = mesh
        .undirected_edges()
        .into_iter()
        .filter(|&(a, b)| (mesh.vertices[a] - mesh.vertices[b]).norm() < threshold)
        .collect();
    if short.is_empty() {
        return RefineOutcome {
            mesh: mesh.clone(),
            rolled_back: false,
            collapsed_edges: 0,
        };
    }

    let mut uf = UnionFind::new(mesh.vertices.len());
    for &(a, b) in &short {
        uf.union(a, b);
    }
    // Cluster means become the surviving vertex positions.
    let mut sum = vec![nalgebra::Vector3::zeros(); mesh.vertices.len()];
    let mut count = vec![0usize; mesh.vertices.len()];
    for i in 0..mesh.vertices.len() {
        let r = uf.find(i);
        sum[r] += mesh.vertices[i].coords;
        count[r] += 1;
    }
    let mut remap = vec![usize::MAX; mesh.vertices.len()];
    let mut vertices = Vec::new();
    for i in 0..mesh.vertices.len() {
        if uf.find(i) == i {
            remap[i] = vertices.len();
            vertices.push(nalgebra::Point3::from(sum[i] / count[i] as f64));
        }
    }
    let mut faces = Vec::new();
    let mut materials = Vec::new();
    for (j, f) in mesh.faces.iter().enumerate() {
        let g = [
            remap[uf.find(f[0])],
            remap[uf.find(f[1])],
            remap[uf.find(f[2])],
        ];
        if g[0] == g[1] || g[1] == g[2] || g[0] == g[2] {
            continue; // face collapsed to an edge or point
        }
        faces.push(g);
        materials.push(mesh.face_materials[j]);
    }
    let candidate = Mesh {
        vertices,
        faces,
        face_materials: materials,
    };
    if candidate.check_watertight().ok {
        RefineOutcome {
            mesh: candidate,
            rolled_back: false,
            collapsed_edges: short.len(),
        }
    } else {
        RefineOutcome {
            mesh: mesh.clone(),
            rolled_back: true,
            collapsed_edges: 0,
        }
    }
}

/// Uniform 1→4 subdivision followed by short-edge cleanup.
///
/// If the cleanup of the subdivided mesh breaks watertightness the whole
/// refinement is rolled back and the input returned unchanged.
pub fn refine(mesh: &Mesh) -> RefineOutcome {
    let sub = subdivide(mesh);
    let cleaned = cleanup(&sub);
    if cleaned.rolled_back {
        RefineOutcome {
            mesh: mesh.clone(),
            rolled_back: true,
            collapsed_edges: 0,
        }
    } else {
        RefineOutcome {
            mesh: cleaned.mesh,
            rolled_back: false,
            collapsed_edges: cleaned.collapsed_edges,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_icosphere, make_tetrahedron};
    use nalgebra::Point3;

    #[test]
    fn subdivision_quadruples_faces_and_stays_watertight() {
        let m = make_icosphere(2, 0.5, Point3::origin());
        let s = subdivide(&m);
        assert_eq!(s.faces.len(), 4 * m.faces.len());
        assert!(s.check_watertight().ok);
        assert_eq!(s.face_materials.len(), s.faces.len());
        // Refinement of a well-shaped mesh has nothing to collapse.
        let r = refine(&m);
        assert!(!r.rolled_back);
        assert_eq!(r.collapsed_edges, 0);
        assert_eq!(r.mesh.faces.len(), 4 * m.faces.len());
    }

    #[test]
    fn materials_are_inherited_by_children() {
        let mut m = make_tetrahedron(1.0);
        m.face_materials[2] = (3, 1);
        let s = subdivide(&m);
        for child in 0..4 {
            assert_eq!(s.face_materials[2 * 4 + child], (3, 1));
        }
    }

    #[test]
    fn short_edges_are_collapsed() {
        // Pull two sphere vertices almost together so one edge undercuts the
        // threshold.
        let mut m = make_icosphere(1, 0.5, Point3::origin());
        let (a, b) = m.undirected_edges()[0];
        let target = m.vertices[a] + (m.vertices[b] - m.vertices[a]) * 1e-6;
        m.vertices[b] = target;
        let out = cleanup(&m);
        assert!(!out.rolled_back);
        assert!(out.collapsed_edges >= 1);
        assert!(out.mesh.vertices.len() < m.vertices.len());
        assert!(out.mesh.check_watertight().ok);
    }

    #[test]
    fn untouched_mesh_is_returned_verbatim() {
        let m = make_icosphere(1, 0.5, Point3::origin());
        let out = cleanup(&m);
        assert_eq!(out.mesh, m);
        assert_eq!(out.collapsed_edges, 0);
    }
}
