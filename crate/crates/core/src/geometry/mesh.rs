//! Triangle surface meshes with per-face material labels.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::AREA_EPS_FACTOR;
use crate::{Error, Result};

/// Closed triangle surface.
///
/// Faces are wound counter-clockwise seen from outside, so the unnormalized
/// face normal `(v1 - v0) × (v2 - v0)` points from the interior material to
/// the exterior one. `face_materials[j] = (interior, exterior)` holds indices
/// into a [`MaterialTable`]; material 0 is reserved for the surrounding air.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub face_materials: Vec<(usize, usize)>,
}

/// Result of a watertightness check: `ok` iff every directed edge occurs
/// exactly once and its reversal occurs in exactly one other face.
#[derive(Debug, Clone)]
pub struct WatertightReport {
    pub ok: bool,
    /// Directed edges whose multiplicity or reversal is wrong.
    pub violations: Vec<(usize, usize)>,
}

impl Mesh {
    /// Builds a mesh with all faces labelled `(interior: 1, exterior: 0)`.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Self {
        let n = faces.len();
        Mesh {
            vertices,
            faces,
            face_materials: vec![(1, 0); n],
        }
    }

    /// Assigns the same `(interior, exterior)` material pair to every face.
    pub fn set_materials(&mut self, interior: usize, exterior: usize) {
        for m in &mut self.face_materials {
            *m = (interior, exterior);
        }
    }

    /// Checks index ranges and per-face vertex distinctness.
    pub fn validate(&self) -> Result<()> {
        if self.face_materials.len() != self.faces.len() {
            return Err(Error::InvalidMesh(format!(
                "{} faces but {} material pairs",
                self.faces.len(),
                self.face_materials.len()
            )));
        }
        let k = self.vertices.len();
        for (j, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v >= k) {
                return Err(Error::InvalidMesh(format!(
                    "face {j} references vertex out of range (mesh has {k} vertices)"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {j} repeats a vertex index"
                )));
            }
        }
        Ok(())
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Length of the bounding-box diagonal.
    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Area threshold below which a face counts as degenerate.
    pub fn area_eps(&self) -> f64 {
        let d = self.bbox_diagonal();
        AREA_EPS_FACTOR * d * d
    }

    /// Area vector of face `j`: half the cross product of its edge vectors,
    /// pointing along the outward normal with magnitude equal to the area.
    pub fn face_area_vector(&self, j: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[j];
        let u = self.vertices[b] - self.vertices[a];
        let w = self.vertices[c] - self.vertices[a];
        0.5 * u.cross(&w)
    }

    /// Unit outward normals per face. Degenerate faces (area below
    /// [`Mesh::area_eps`]) are flagged with a zero vector instead.
    pub fn face_normals(&self) -> Vec<Vector3<f64>> {
        let eps = self.area_eps();
        (0..self.faces.len())
            .map(|j| {
                let av = self.face_area_vector(j);
                let area = av.norm();
                if area < eps {
                    Vector3::zeros()
                } else {
                    av / area
                }
            })
            .collect()
    }

    /// Signed enclosed volume via the divergence theorem. Positive for closed
    /// meshes wound counter-clockwise seen from outside.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let va = self.vertices[a].coords;
                let vb = self.vertices[b].coords;
                let vc = self.vertices[c].coords;
                va.dot(&vb.cross(&vc)) / 6.0
            })
            .sum()
    }

    /// Flips every face if the signed volume is negative, so closed meshes
    /// end up wound outward.
    pub(crate) fn orient_outward(&mut self) {
        if self.signed_volume() < 0.0 {
            for f in &mut self.faces {
                f.swap(1, 2);
            }
        }
    }

    /// Watertightness: every directed edge `(a, b)` appears exactly once, and
    /// `(b, a)` appears in exactly one other face.
    pub fn check_watertight(&self) -> WatertightReport {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for e in 0..3 {
                let d = (f[e], f[(e + 1) % 3]);
                *count.entry(d).or_insert(0) += 1;
            }
        }
        let mut violations = Vec::new();
        for (&(a, b), &n) in &count {
            if n != 1 || count.get(&(b, a)) != Some(&1) {
                violations.push((a, b));
            }
        }
        violations.sort_unstable();
        WatertightReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    /// Undirected edges, each listed once as `(min, max)`, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| {
                (0..3).map(move |e| {
                    let (a, b) = (f[e], f[(e + 1) % 3]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Map from undirected edge to the faces containing it, in face order.
    pub fn edge_faces(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (j, f) in self.faces.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(j);
            }
        }
        map
    }

    /// One-ring vertex neighborhoods (sorted, deduplicated).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.undirected_edges() {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
        for n in &mut nbrs {
            n.sort_unstable();
            n.dedup();
        }
        nbrs
    }

    /// Appends another mesh, offsetting its vertex indices. Material labels
    /// are kept as-is, so both meshes must index the same material table.
    pub fn merge(&mut self, other: &Mesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        self.face_materials.extend_from_slice(&other.face_materials);
    }

    /// Returns a copy translated by `t`.
    pub fn translated(&self, t: Vector3<f64>) -> Mesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v += t;
        }
        m
    }
}

/// Attenuation per material id. Index 0 is the surrounding air and must stay
/// at exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable {
    pub mu: Vec<f64>,
}

impl MaterialTable {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        let t = MaterialTable { mu };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() || self.mu[0] != 0.0 {
            return Err(Error::InvalidConfig(
                "material 0 is the surrounding air and must have attenuation 0".into(),
            ));
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("non-finite attenuation".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// Checks that every material referenced by the mesh exists.
    pub fn covers(&self, mesh: &Mesh) -> Result<()> {
        for &(i, e) in &mesh.face_materials {
            if i >= self.mu.len() || e >= self.mu.len() {
                return Err(Error::InvalidConfig(format!(
                    "face references material {} but table has {} entries",
                    i.max(e),
                    self.mu.len()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_box, make_icosphere};

    #[test]
    fn cube_is_watertight_and_oriented() {
        let m = make_box(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0));
        m.validate().unwrap();
        assert!(m.check_watertight().ok);
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
        // Euler characteristic of a sphere-topology mesh: V - E + F = 2.
        let euler =
            m.vertices.len() as i64 - m.undirected_edges().len() as i64 + m.faces.len() as i64;
        assert_eq!(euler, 2);
    }

    #[test]
    fn missing_face_breaks_watertightness() {
        let mut m = make_box(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0));
        m.faces.pop();
        m.face_materials.pop();
        let report = m.check_watertight();
        assert!(!report.ok);
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn area_vectors_of_closed_mesh_sum_to_zero() {
        let m = make_icosphere(2, 0.7, Point3::new(0.1, -0.2, 0.05));
        let total: Vector3<f64> = (0..m.faces.len()).map(|j| m.face_area_vector(j)).sum();
        let area: f64 = (0..m.faces.len())
            .map(|j| m.face_area_vector(j).norm())
            .sum();
        assert!(total.norm() < 1e-7 * area);
    }

    #[test]
    fn degenerate_face_gets_zero_normal() {
        let verts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0), // collinear
            Point3::new(0.0, 1.0, 0.0),
        ];
        let m = Mesh::new(verts, vec![[0, 1, 2], [0, 1, 3]]);
        let n = m.face_normals();
        assert_eq!(n[0], Vector3::zeros());
        assert!((n[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn air_material_must_be_zero() {
        assert!(MaterialTable::new(vec![0.0, 1.0]).is_ok());
        assert!(MaterialTable::new(vec![0.5, 1.0]).is_err());
        assert!(MaterialTable::new(vec![]).is_err());
    }
}
