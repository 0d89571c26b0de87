//! Ray-casting reference projector and measurement noise model.
//!
//! This is a second, independent route to the same projections as
//! [`crate::projector`]: one ray per pixel center, ray–triangle intersections
//! in the global frame, hits sorted by distance, and exact per-material path
//! lengths accumulated by walking the sorted crossings. It deliberately
//! shares no coverage or interpolation code with the rasterizer, which makes
//! it suitable both as a test oracle and as the generator of synthetic scan
//! data that the rasterizing projector has to explain.
//!
//! Rays that graze edges or vertices are recast with a tiny fixed in-plane
//! jitter (at most twice) and masked as invalid if still ambiguous.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{MaterialTable, Mesh, ProjectionStack, ScanGeometry};
use crate::parallel::map_indexed;
use crate::Result;

/// Relative jitter applied to ambiguous rays, scaled by the mesh bounding-box
/// diagonal.
pub const RAY_JITTER_FACTOR: f64 = 1e-9;

/// Relative tolerance on barycentric hit coordinates below which a hit
/// counts as grazing an edge or vertex.
const GRAZE_EPS: f64 = 1e-9;

/// Ray-cast projection plus per-pixel bookkeeping.
#[derive(Debug, Clone)]
pub struct CastResult {
    pub stack: ProjectionStack,
    /// Accepted ray–surface crossings per pixel (angle-major).
    pub hit_counts: Vec<u32>,
    /// Pixels that needed at least one jittered recast.
    pub recast_pixels: usize,
    /// Pixels still ambiguous after two recasts (masked invalid).
    pub masked_pixels: usize,
}

enum RayOutcome {
    /// Path-length integral and number of crossings.
    Clean(f64, u32),
    /// Grazing or inconsistent crossings; retry with jitter.
    Ambiguous,
}

/// Intersects one ray with a candidate face list and walks the sorted hits.
///
/// `faces` gives global face indices; geometry tests use the Möller–Trumbore
/// formulation. A crossing with positive orientation (ray leaving the
/// interior material) must start from that material, a negative one must
/// start from the exterior; any mismatch, grazing hit, or a walk that does
/// not end in air marks the ray ambiguous.
fn cast_ray(
    origin: nalgebra::Point3<f64>,
    dir: nalgebra::Vector3<f64>,
    mesh: &Mesh,
    materials: &MaterialTable,
    candidates: &[u32],
) -> RayOutcome {
    let mut hits: Vec<(f64, f64, usize, usize)> = Vec::new();
    for &jf in candidates {
        let [a, b, c] = mesh.faces[jf as usize];
        let v0 = mesh.vertices[a];
        let e1 = mesh.vertices[b] - v0;
        let e2 = mesh.vertices[c] - v0;
        let pvec = dir.cross(&e2);
        let det = e1.dot(&pvec);
        if det.abs() < 1e-12 * e1.norm() * e2.norm() {
            continue; // ray parallel to the face plane
        }
        let inv = 1.0 / det;
        let tvec = origin - v0;
        let u = tvec.dot(&pvec) * inv;
        if u < -GRAZE_EPS || u > 1.0 + GRAZE_EPS {
            continue;
        }
        let qvec = tvec.cross(&e1);
        let v = dir.dot(&qvec) * inv;
        if v < -GRAZE_EPS || u + v > 1.0 + GRAZE_EPS {
            continue;
        }
        let margin = u.min(v).min(1.0 - u - v);
        if margin < GRAZE_EPS {
            return RayOutcome::Ambiguous;
        }
        let t = e2.dot(&qvec) * inv;
        if t < 0.0 {
            continue;
        }
        let (mi, me) = mesh.face_materials[jf as usize];
        // det = e1 · (dir × e2) = -dir · (e1 × e2), so the sign of the
        // crossing along the outward normal is the negated determinant sign.
        hits.push((t, -det.signum(), mi, me));
    }
    hits.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut current = 0usize; // air
    let mut prev_t = 0.0;
    let mut total = 0.0;
    for &(t, sign, mi, me) in &hits {
        let (expected, next) = if sign > 0.0 { (mi, me) } else { (me, mi) };
        if current != expected {
            return RayOutcome::Ambiguous;
        }
        total += materials.mu[current] * (t - prev_t);
        prev_t = t;
        current = next;
    }
    if current != 0 {
        return RayOutcome::Ambiguous;
    }
    RayOutcome::Clean(total, hits.len() as u32)
}

/// Casts one ray per pixel center for every pose.
///
/// Candidate faces per pixel come from a conservative per-row binning of the
/// projected face bounding boxes; the accept/reject decision and all path
/// lengths are computed in the global frame.
pub fn cast_forward_full(
    mesh: &Mesh,
    materials: &MaterialTable,
    geometry: &ScanGeometry,
) -> Result<CastResult> {
    mesh.validate()?;
    materials.validate()?;
    materials.covers(mesh)?;
    geometry.validate()?;

    let (rows, cols, pitch) = (geometry.rows, geometry.cols, geometry.pixel_pitch);
    let per_angle = geometry.pixels_per_angle();
    let eps_ray = RAY_JITTER_FACTOR * mesh.bbox_diagonal();
    // Jitter offsets in detector-plane coordinates, applied in order.
    let jitter = [[0.0, 0.0], [eps_ray, eps_ray], [-eps_ray, 2.0 * eps_ray]];

    let results = map_indexed(geometry.n_angles(), |ai| {
        let pose = &geometry.poses[ai];
        let (u_axis, v_axis, dir) = (pose.axis_u(), pose.axis_v(), pose.ray_direction());

        // Bin faces by the pixel rows their projected bounding box can touch,
        // padded by a pixel so jittered recasts stay covered.
        let dv = crate::geometry::to_detector_frame(mesh, pose);
        let pad = pitch;
        let mut row_bins: Vec<Vec<u32>> = vec![Vec::new(); rows];
        let mut x_range = vec![[0.0f64; 2]; mesh.faces.len()];
        let row_of = |y: f64| 0.5 * (rows as f64 - 1.0) - y / pitch;
        for (j, f) in mesh.faces.iter().enumerate() {
            let sx: Vec<f64> = f.iter().map(|&k| dv.s[k][0]).collect();
            let sy: Vec<f64> = f.iter().map(|&k| dv.s[k][1]).collect();
            let ymin = sy.iter().cloned().fold(f64::INFINITY, f64::min) - pad;
            let ymax = sy.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad;
            x_range[j] = [
                sx.iter().cloned().fold(f64::INFINITY, f64::min) - pad,
                sx.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + pad,
            ];
            let r_lo = (row_of(ymax).floor() as isize).max(0);
            let r_hi = (row_of(ymin).ceil() as isize).min(rows as isize - 1);
            for r in r_lo..=r_hi {
                if r >= 0 {
                    row_bins[r as usize].push(j as u32);
                }
            }
        }

        let mut image = vec![0.0f64; per_angle];
        let mut counts = vec![0u32; per_angle];
        let mut valid = vec![true; per_angle];
        let mut recast = 0usize;
        for r in 0..rows {
            let mut row_candidates: Vec<u32> = Vec::new();
            for c in 0..cols {
                let [x, y] = geometry.pixel_center(r, c);
                row_candidates.clear();
                row_candidates.extend(
                    row_bins[r]
                        .iter()
                        .filter(|&&j| {
                            let [lo, hi] = x_range[j as usize];
                            x >= lo && x <= hi
                        })
                        .copied(),
                );
                let mut settled = false;
                for (attempt, [jx, jy]) in jitter.iter().enumerate() {
                    let origin = pose.p + (x + jx) * u_axis + (y + jy) * v_axis;
                    match cast_ray(origin, dir, mesh, materials, &row_candidates) {
                        RayOutcome::Clean(value, n) => {
                            image[r * cols + c] = value;
                            counts[r * cols + c] = n;
                            if attempt > 0 {
                                recast += 1;
                            }
                            settled = true;
                            break;
                        }
                        RayOutcome::Ambiguous => {}
                    }
                }
                if !settled {
                    valid[r * cols + c] = false;
                }
            }
        }
        (image, counts, valid, recast)
    });

    let n = geometry.n_pixels();
    let mut data = Vec::with_capacity(n);
    let mut hit_counts = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut recast_pixels = 0;
    for (image, counts, valid, recast) in results {
        data.extend_from_slice(&image);
        hit_counts.extend_from_slice(&counts);
        mask.extend_from_slice(&valid);
        recast_pixels += recast;
    }
    let masked_pixels = mask.iter().filter(|&&v| !v).count();
    let stack = ProjectionStack {
        geometry: geometry.clone(),
        data,
        mask: if masked_pixels > 0 { Some(mask) } else { None },
    };
    Ok(CastResult {
        stack,
        hit_counts,
        recast_pixels,
        masked_pixels,
    })
}

/// Ray-cast projection; see [`cast_forward_full`] for details.
pub fn cast_forward(
    mesh: &Mesh,
    materials: &MaterialTable,
    geometry: &ScanGeometry,
) -> Result<ProjectionStack> {
    cast_forward_full(mesh, materials, geometry).map(|r| r.stack)
}

/// Adds white Gaussian noise scaled to the stack: each pixel receives
/// `level · rms · g` with `g ~ N(0,1)` and `rms` taken over the valid pixels
/// of the clean stack. The generator is seeded, so equal seeds produce
/// bit-identical results; the mask is preserved.
pub fn add_noise(stack: &ProjectionStack, level: f64, seed: u64) -> ProjectionStack {
    let rms = stack.rms();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = stack.clone();
    for v in &mut noisy.data {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v += level * rms * g;
    }
    noisy
}
