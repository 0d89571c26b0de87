//! Coverage-exact triangle rasterization over a detector pixel grid.
//!
//! Every triangle claims the pixels whose centers fall inside its projected
//! outline. Two faces sharing an edge must claim a center lying exactly on
//! that edge exactly once between them, otherwise the per-pixel sign parity
//! used to detect broken meshes would report false artifacts. To make that
//! decision robust the edge function of a shared edge is evaluated in a
//! canonical form (anchored at the lower vertex index), which gives the two
//! faces bit-exact opposite values, and exact zeros are resolved by a
//! deterministic top-left-style rule on the edge direction.

use super::barycentric::{cross2, sub2};
use crate::geometry::{DetectorVertices, ScanGeometry};

/// One (pixel, face) coverage event of a projected triangle.
///
/// `pixel` is the row-major index within the angle image, `weights` the
/// barycentric weights of the pixel center, `depth` the interpolated distance
/// of the surface point from the detector plane, and `sign` (±1) the
/// orientation of the face relative to the ray direction.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterFragment {
    pub pixel: usize,
    pub face: usize,
    pub weights: [f64; 3],
    pub depth: f64,
    pub sign: f64,
}

/// All fragments of one angle image plus per-pixel sign parity.
///
/// A nonzero parity marks an artifact pixel: along a ray through a closed
/// surface front- and back-facing crossings must balance.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentBuffer {
    pub fragments: Vec<RasterFragment>,
    pub parity: Vec<i32>,
    pub covered_pixels: usize,
    pub degenerate_faces: usize,
}

impl FragmentBuffer {
    pub fn artifact_pixels(&self) -> usize {
        self.parity.iter().filter(|&&p| p != 0).count()
    }
}

/// Edge function of the directed edge `a -> b` at `q`, evaluated in a
/// canonical form: the endpoint with the smaller vertex index anchors the
/// computation, so the two faces sharing the undirected edge obtain exactly
/// opposite floating-point values.
#[inline]
fn edge_canonical(sa: [f64; 2], sb: [f64; 2], ia: usize, ib: usize, q: [f64; 2]) -> f64 {
    if ia < ib {
        cross2(sub2(sb, sa), sub2(q, sa))
    } else {
        -cross2(sub2(sa, sb), sub2(q, sb))
    }
}

/// Tie rule for a pixel center lying exactly on an edge: claim it only from
/// the face whose winding-normalized edge direction points into the upper
/// half-plane (or along +x on the boundary). Shared edges of consistently
/// wound neighbors have opposite normalized directions, so exactly one of
/// the two faces claims the center.
#[inline]
fn tie_claim(dir: [f64; 2]) -> bool {
    dir[1] > 0.0 || (dir[1] == 0.0 && dir[0] > 0.0)
}

/// Rasterizes every face onto the pixel grid of `geom` (poses are not used;
/// the caller picks the angle by supplying that pose's [`DetectorVertices`]).
///
/// Faces whose projected area falls below `1e-12 · (detector width)²` are
/// skipped and counted in `degenerate_faces`.
pub fn rasterize(
    dv: &DetectorVertices,
    faces: &[[usize; 3]],
    geom: &ScanGeometry,
) -> FragmentBuffer {
    let (rows, cols, pitch) = (geom.rows, geom.cols, geom.pixel_pitch);
    let width = cols as f64 * pitch;
    let area_eps = 1e-12 * width * width;

    let mut fragments = Vec::new();
    let mut parity = vec![0i32; rows * cols];
    let mut seen = vec![false; rows * cols];
    let mut covered_pixels = 0usize;
    let mut degenerate_faces = 0usize;

    // Inverse of the pixel-center mapping, used for conservative bounds.
    let col_of = |x: f64| x / pitch + 0.5 * (cols as f64 - 1.0);
    let row_of = |y: f64| 0.5 * (rows as f64 - 1.0) - y / pitch;

    for (j, &[i0, i1, i2]) in faces.iter().enumerate() {
        let s = [dv.s[i0], dv.s[i1], dv.s[i2]];
        let l = [dv.depth[i0], dv.depth[i1], dv.depth[i2]];
        let a2 = cross2(sub2(s[1], s[0]), sub2(s[2], s[0]));
        if a2.abs() < 2.0 * area_eps {
            degenerate_faces += 1;
            continue;
        }
        let sgn = if a2 > 0.0 { 1.0 } else { -1.0 };

        let (xmin, xmax) = (
            s[0][0].min(s[1][0]).min(s[2][0]),
            s[0][0].max(s[1][0]).max(s[2][0]),
        );
        let (ymin, ymax) = (
            s[0][1].min(s[1][1]).min(s[2][1]),
            s[0][1].max(s[1][1]).max(s[2][1]),
        );
        let c_lo = (col_of(xmin).floor() as isize - 1).max(0);
        let c_hi = (col_of(xmax).ceil() as isize + 1).min(cols as isize - 1);
        let r_lo = (row_of(ymax).floor() as isize - 1).max(0);
        let r_hi = (row_of(ymin).ceil() as isize + 1).min(rows as isize - 1);
        if c_lo > c_hi || r_lo > r_hi {
            continue;
        }

        let idx = [i0, i1, i2];
        for r in r_lo as usize..=r_hi as usize {
            for c in c_lo as usize..=c_hi as usize {
                let q = geom.pixel_center(r, c);
                let mut e = [0.0; 3];
                let mut inside = true;
                for k in 0..3 {
                    let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                    e[k] = edge_canonical(s[a], s[b], idx[a], idx[b], q);
                    let f = e[k] * sgn;
                    let claims = if f > 0.0 {
                        true
                    } else if f == 0.0 {
                        let dir = sub2(s[b], s[a]);
                        tie_claim([dir[0] * sgn, dir[1] * sgn])
                    } else {
                        false
                    };
                    if !claims {
                        inside = false;
                        break;
                    }
                }
                if !inside {
                    continue;
                }
                let w = [e[0] / a2, e[1] / a2, e[2] / a2];
                let depth = w[0] * l[0] + w[1] * l[1] + w[2] * l[2];
                let pixel = r * cols + c;
                fragments.push(RasterFragment {
                    pixel,
                    face: j,
                    weights: w,
                    depth,
                    sign: sgn,
                });
                parity[pixel] += sgn as i32;
                if !seen[pixel] {
                    seen[pixel] = true;
                    covered_pixels += 1;
                }
            }
        }
    }

    FragmentBuffer {
        fragments,
        parity,
        covered_pixels,
        degenerate_faces,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_box, to_detector_frame, DetectorPose, ScanGeometry};
    use nalgebra::{Matrix3, Point3};

    fn face_on_pose() -> DetectorPose {
        DetectorPose::new(Matrix3::identity(), Point3::new(0.0, 0.0, -2.0)).unwrap()
    }

    fn grid(rows: usize, cols: usize, pitch: f64) -> ScanGeometry {
        ScanGeometry::new(vec![face_on_pose()], rows, cols, pitch).unwrap()
    }

    #[test]
    fn cube_produces_two_fragments_per_interior_pixel() {
        let cube = make_box(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
        let geom = grid(2, 3, 0.15); // centers at x ∈ {±0.15, 0}, y = ±0.075
        let dv = to_detector_frame(&cube, &geom.poses[0]);
        let buf = rasterize(&dv, &cube.faces, &geom);
        // The four side faces are edge-on and collapse to degenerate slivers.
        assert_eq!(buf.degenerate_faces, 8);
        assert_eq!(buf.covered_pixels, 6);
        let mut per_pixel = vec![0usize; 6];
        for f in &buf.fragments {
            per_pixel[f.pixel] += 1;
        }
        assert!(per_pixel.iter().all(|&n| n == 2), "fragments {per_pixel:?}");
        assert!(buf.parity.iter().all(|&p| p == 0));
    }

    #[test]
    fn pixel_center_on_shared_diagonal_is_claimed_once() {
        // A 1×1 grid puts the only pixel center at the origin, exactly on the
        // projected diagonal shared by the two triangles of each z-face.
        let cube = make_box(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
        let geom = grid(1, 1, 0.4);
        let dv = to_detector_frame(&cube, &geom.poses[0]);
        let buf = rasterize(&dv, &cube.faces, &geom);
        assert_eq!(buf.fragments.len(), 2, "one fragment per face pair");
        assert_eq!(buf.parity[0], 0);
        let p: f64 = buf
            .fragments
            .iter()
            .map(|f| f.sign * f.depth)
            .sum();
        assert!((p - 1.0).abs() < 1e-12, "chord through the cube, got {p}");
    }

    #[test]
    fn fragment_weights_are_a_partition_of_unity() {
        let cube = make_box(Point3::new(-0.4, -0.3, -0.5), Point3::new(0.45, 0.5, 0.35));
        let geom = grid(16, 16, 0.08);
        let dv = to_detector_frame(&cube, &geom.poses[0]);
        let buf = rasterize(&dv, &cube.faces, &geom);
        assert!(!buf.fragments.is_empty());
        for f in &buf.fragments {
            let sum: f64 = f.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(f.weights.iter().all(|&w| w >= -1e-9));
            assert!(f.sign == 1.0 || f.sign == -1.0);
        }
    }

    #[test]
    fn rasterization_is_bit_reproducible() {
        let cube = make_box(Point3::new(-0.31, -0.47, -0.29), Point3::new(0.53, 0.41, 0.37));
        let geom = grid(24, 24, 0.05);
        let dv = to_detector_frame(&cube, &geom.poses[0]);
        let a = rasterize(&dv, &cube.faces, &geom);
        let b = rasterize(&dv, &cube.faces, &geom);
        assert_eq!(a, b);
    }
}
