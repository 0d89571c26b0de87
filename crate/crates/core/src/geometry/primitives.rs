//! Generators for the closed surfaces used as phantoms and initial shapes.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::Mesh;

/// Icosphere: an icosahedron subdivided `subdivisions` times with every
/// vertex projected onto the sphere of the given radius. Face count is
/// `20 * 4^subdivisions`; all faces are wound outward.
pub fn make_icosphere(subdivisions: usize, radius: f64, center: Point3<f64>) -> Mesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut vertices: Vec<Vector3<f64>> = raw
        .iter()
        .map(|v| Vector3::new(v[0], v[1], v[2]).normalize())
        .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    vertices.push((vertices[a] + vertices[b]).normalize());
                    vertices.len() - 1
                });
            }
            next_faces.push([f[0], mid[0], mid[2]]);
            next_faces.push([f[1], mid[1], mid[0]]);
            next_faces.push([f[2], mid[2], mid[1]]);
            next_faces.push(mid);
        }
        faces = next_faces;
    }

    let verts = vertices
        .iter()
        .map(|v| center + v * radius)
        .collect();
    let mut mesh = Mesh::new(verts, faces);
    mesh.orient_outward();
    mesh
}

/// Torus around the global z-axis: `major_radius` is the distance from the
/// axis to the tube center, `minor_radius` the tube radius. The grid has
/// `segments_u` steps around the axis and `segments_v` around the tube, for
/// `2 * segments_u * segments_v` outward-wound faces.
pub fn make_torus(
    major_radius: f64,
    minor_radius: f64,
    segments_u: usize,
    segments_v: usize,
) -> Mesh {
    assert!(segments_u >= 3 && segments_v >= 3, "torus needs at least 3 segments per loop");
    let mut vertices = Vec::with_capacity(segments_u * segments_v);
    for i in 0..segments_u {
        let u = 2.0 * std::f64::consts::PI * i as f64 / segments_u as f64;
        for j in 0..segments_v {
            let v = 2.0 * std::f64::consts::PI * j as f64 / segments_v as f64;
            let ring = major_radius + minor_radius * v.cos();
            vertices.push(Point3::new(
                ring * u.cos(),
                ring * u.sin(),
                minor_radius * v.sin(),
            ));
        }
    }
    let idx = |i: usize, j: usize| (i % segments_u) * segments_v + (j % segments_v);
    let mut faces = Vec::with_capacity(2 * segments_u * segments_v);
    for i in 0..segments_u {
        for j in 0..segments_v {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let mut mesh = Mesh::new(vertices, faces);
    mesh.orient_outward();
    mesh
}

/// Axis-aligned box `[lo, hi]` as 12 outward-wound triangles.
pub fn make_box(lo: Point3<f64>, hi: Point3<f64>) -> Mesh {
    let v = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
    let vertices = vec![
        v(lo.x, lo.y, lo.z),
        v(hi.x, lo.y, lo.z),
        v(hi.x, hi.y, lo.z),
        v(lo.x, hi.y, lo.z),
        v(lo.x, lo.y, hi.z),
        v(hi.x, lo.y, hi.z),
        v(hi.x, hi.y, hi.z),
        v(lo.x, hi.y, hi.z),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2], // bottom, normal -z
        [4, 5, 6],
        [4, 6, 7], // top, normal +z
        [0, 1, 5],
        [0, 5, 4], // front, normal -y
        [3, 7, 6],
        [3, 6, 2], // back, normal +y
        [0, 4, 7],
        [0, 7, 3], // left, normal -x
        [1, 2, 6],
        [1, 6, 5], // right, normal +x
    ];
    let mut mesh = Mesh::new(vertices, faces);
    mesh.orient_outward();
    mesh
}

/// Regular tetrahedron with the given edge length, centered at the origin.
pub fn make_tetrahedron(edge: f64) -> Mesh {
    let s = edge / (2.0 * 2.0f64.sqrt());
    let vertices = vec![
        Point3::new(s, s, s),
        Point3::new(s, -s, -s),
        Point3::new(-s, s, -s),
        Point3::new(-s, -s, s),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    let mut mesh = Mesh::new(vertices, faces);
    mesh.orient_outward();
    mesh
}
