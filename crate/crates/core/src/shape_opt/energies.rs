//! Surface regularization energies and their analytic vertex gradients.
//!
//! Each function returns `(energy, gradient)` with one gradient vector per
//! mesh vertex. All three energies are translation invariant, so their
//! gradients sum to zero over the mesh.

use nalgebra::Vector3;

use crate::geometry::Mesh;

/// Uniform-weight Laplacian energy: squared distance of every vertex from
/// the mean of its one-ring neighbors.
pub fn laplacian_energy(mesh: &Mesh) -> (f64, Vec<Vector3<f64>>) {
    let neighbors = mesh.vertex_neighbors();
    let k = mesh.vertices.len();
    let mut residual = vec![Vector3::zeros(); k];
    let mut energy = 0.0;
    for (i, nbrs) in neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let mut mean = Vector3::zeros();
        for &n in nbrs {
            mean += mesh.vertices[n].coords;
        }
        mean /= nbrs.len() as f64;
        residual[i] = mesh.vertices[i].coords - mean;
        energy += residual[i].norm_squared();
    }
    let mut grad = vec![Vector3::zeros(); k];
    for (i, nbrs) in neighbors.iter().enumerate() {
        grad[i] += 2.0 * residual[i];
        // Vertex i also shifts the neighbor means of its one-ring.
        for &n in nbrs {
            grad[i] -= 2.0 / neighbors[n].len() as f64 * residual[n];
        }
    }
    (energy, grad)
}

/// Total squared edge length, every undirected edge counted once.
pub fn edge_energy(mesh: &Mesh) -> (f64, Vec<Vector3<f64>>) {
    let mut energy = 0.0;
    let mut grad = vec![Vector3::zeros(); mesh.vertices.len()];
    for &(a, b) in &mesh.undirected_edges() {
        let d = mesh.vertices[a] - mesh.vertices[b];
        energy += d.norm_squared();
        grad[a] += 2.0 * d;
        grad[b] -= 2.0 * d;
    }
    (energy, grad)
}

/// Flatness energy: `Σ_e (1 - cos θ_e)²` over interior edges, where `θ_e` is
/// the dihedral angle between the unit normals of the two faces sharing `e`.
/// Pushes adjacent faces towards coplanarity. Edges touching a degenerate
/// face are skipped.
pub fn flatten_energy(mesh: &Mesh) -> (f64, Vec<Vector3<f64>>) {
    let eps = mesh.area_eps();
    let nf = mesh.faces.len();
    // Unnormalized face normals c = (v1-v0) × (v2-v0), |c| = 2·area.
    let mut cross = vec![Vector3::zeros(); nf];
    let mut norm = vec![0.0f64; nf];
    for j in 0..nf {
        let [a, b, c0] = mesh.faces[j];
        let u = mesh.vertices[b] - mesh.vertices[a];
        let w = mesh.vertices[c0] - mesh.vertices[a];
        cross[j] = u.cross(&w);
        norm[j] = cross[j].norm();
    }

    let mut energy = 0.0;
    let mut grad = vec![Vector3::zeros(); mesh.vertices.len()];
    // Per-face accumulation of dE/d(cross_j); distributed to vertices below.
    let mut d_cross = vec![Vector3::zeros(); nf];

    let mut edges: Vec<((usize, usize), &Vec<usize>)> = Vec::new();
    let ef = mesh.edge_faces();
    for (e, fs) in &ef {
        edges.push((*e, fs));
    }
    edges.sort_unstable_by_key(|(e, _)| *e);

    for (_, fs) in edges {
        if fs.len() != 2 {
            continue;
        }
        let (ja, jb) = (fs[0], fs[1]);
        if norm[ja] < 2.0 * eps || norm[jb] < 2.0 * eps {
            continue;
        }
        let na = cross[ja] / norm[ja];
        let nb = cross[jb] / norm[jb];
        let cos = na.dot(&nb);
        energy += (1.0 - cos) * (1.0 - cos);
        let dcos = -2.0 * (1.0 - cos);
        // d(cos)/d(cross_a) = (n_b - cos·n_a) / |cross_a|, and symmetrically.
        d_cross[ja] += dcos * (nb - cos * na) / norm[ja];
        d_cross[jb] += dcos * (na - cos * nb) / norm[jb];
    }

    for j in 0..nf {
        let q = d_cross[j];
        if q == Vector3::zeros() {
            continue;
        }
        let [a, b, c0] = mesh.faces[j];
        let u = mesh.vertices[b] - mesh.vertices[a];
        let w = mesh.vertices[c0] - mesh.vertices[a];
        // For c = u × w: dc/dV0 = [w-u]×, dc/dV1 = -[w]×, dc/dV2 = [u]×,
        // whose transposes give the pullbacks below.
        grad[a] += (u - w).cross(&q);
        grad[b] += w.cross(&q);
        grad[c0] += q.cross(&u);
    }
    (energy, grad)
}
