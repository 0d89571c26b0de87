//! Detector poses, scan geometry, and projection stacks.

use nalgebra::{Matrix3, Point3, Vector3};

use super::Mesh;
use crate::{Error, Result};

/// Beam model. Only parallel beams are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Beam {
    #[default]
    Parallel,
}

/// Rigid pose of a planar detector.
///
/// The columns of `r` are the detector axes expressed in the global frame:
/// column 0 spans pixel columns, column 1 spans pixel rows, and column 2 is
/// the ray direction (pointing from the detector towards the object). `p` is
/// the global position of the detector center. A global point `V` maps to
/// detector coordinates `rᵀ (V - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorPose {
    pub r: Matrix3<f64>,
    pub p: Point3<f64>,
}

impl DetectorPose {
    /// Validates that `r` is a rotation (orthonormal within 1e-9 and
    /// positively oriented).
    pub fn new(r: Matrix3<f64>, p: Point3<f64>) -> Result<Self> {
        let dev = (r.transpose() * r - Matrix3::identity()).abs().max();
        if dev > 1e-9 {
            return Err(Error::InvalidGeometry(format!(
                "detector rotation deviates from orthonormal by {dev:.3e}"
            )));
        }
        if r.determinant() <= 0.0 {
            return Err(Error::InvalidGeometry(
                "detector rotation must be positively oriented".into(),
            ));
        }
        Ok(DetectorPose { r, p })
    }

    /// Detector column axis in the global frame.
    pub fn axis_u(&self) -> Vector3<f64> {
        self.r.column(0).into()
    }

    /// Detector row axis in the global frame.
    pub fn axis_v(&self) -> Vector3<f64> {
        self.r.column(1).into()
    }

    /// Ray direction in the global frame.
    pub fn ray_direction(&self) -> Vector3<f64> {
        self.r.column(2).into()
    }
}

/// Mesh vertices expressed in a detector frame: `s` are the in-plane
/// coordinates of each vertex, `depth` its distance along the ray direction.
#[derive(Debug, Clone)]
pub struct DetectorVertices {
    pub s: Vec<[f64; 2]>,
    pub depth: Vec<f64>,
}

/// Projects every vertex into the pose's detector frame.
pub fn to_detector_frame(mesh: &Mesh, pose: &DetectorPose) -> DetectorVertices {
    let u = pose.axis_u();
    let v = pose.axis_v();
    let w = pose.ray_direction();
    let mut s = Vec::with_capacity(mesh.vertices.len());
    let mut depth = Vec::with_capacity(mesh.vertices.len());
    for vert in &mesh.vertices {
        let d = vert - pose.p;
        s.push([u.dot(&d), v.dot(&d)]);
        depth.push(w.dot(&d));
    }
    DetectorVertices { s, depth }
}

/// A set of detector poses sharing one pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGeometry {
    pub beam: Beam,
    pub poses: Vec<DetectorPose>,
    pub rows: usize,
    pub cols: usize,
    pub pixel_pitch: f64,
}

impl ScanGeometry {
    pub fn new(poses: Vec<DetectorPose>, rows: usize, cols: usize, pixel_pitch: f64) -> Result<Self> {
        let g = ScanGeometry {
            beam: Beam::Parallel,
            poses,
            rows,
            cols,
            pixel_pitch,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.poses.is_empty() {
            return Err(Error::InvalidGeometry("no detector poses".into()));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidGeometry("empty pixel grid".into()));
        }
        if !(self.pixel_pitch > 0.0) || !self.pixel_pitch.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        Ok(())
    }

    /// Circular parallel-beam trajectory about the global y-axis.
    ///
    /// Angles are evenly spaced over `[start_deg, end_deg)`, endpoint
    /// exclusive, so a 0..180 scan does not duplicate the opposing view. The
    /// detector center sits `distance` away from the origin, facing it.
    pub fn circular(
        n_angles: usize,
        start_deg: f64,
        end_deg: f64,
        rows: usize,
        cols: usize,
        pixel_pitch: f64,
        distance: f64,
    ) -> Result<Self> {
        if n_angles == 0 {
            return Err(Error::InvalidGeometry("need at least one angle".into()));
        }
        let step = (end_deg - start_deg) / n_angles as f64;
        let poses = (0..n_angles)
            .map(|i| {
                let theta = (start_deg + i as f64 * step).to_radians();
                let r = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), theta)
                    .into_inner();
                let p = Point3::from(r * Vector3::new(0.0, 0.0, -distance));
                DetectorPose::new(r, p)
            })
            .collect::<Result<Vec<_>>>()?;
        ScanGeometry::new(poses, rows, cols, pixel_pitch)
    }

    pub fn n_angles(&self) -> usize {
        self.poses.len()
    }

    /// Pixels per angle image.
    pub fn pixels_per_angle(&self) -> usize {
        self.rows * self.cols
    }

    /// Total pixels over all angles.
    pub fn n_pixels(&self) -> usize {
        self.n_angles() * self.pixels_per_angle()
    }

    /// In-plane detector coordinates of a pixel center. Columns grow along
    /// `axis_u`, row 0 is the top of the image (largest `axis_v` coordinate).
    pub fn pixel_center(&self, row: usize, col: usize) -> [f64; 2] {
        let x = (col as f64 - 0.5 * (self.cols as f64 - 1.0)) * self.pixel_pitch;
        let y = (0.5 * (self.rows as f64 - 1.0) - row as f64) * self.pixel_pitch;
        [x, y]
    }

    /// Flat index of a pixel within the whole stack.
    pub fn pixel_index(&self, angle: usize, row: usize, col: usize) -> usize {
        (angle * self.rows + row) * self.cols + col
    }
}

/// Projection data for every pose of a [`ScanGeometry`], angle-major then
/// row-major. `mask` flags pixel validity (`true` = valid); `None` means all
/// pixels are valid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionStack {
    pub geometry: ScanGeometry,
    pub data: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl ProjectionStack {
    pub fn zeros(geometry: ScanGeometry) -> Self {
        let n = geometry.n_pixels();
        ProjectionStack {
            geometry,
            data: vec![0.0; n],
            mask: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.geometry.n_pixels();
        if self.data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "stack has {} values but geometry implies {}",
                self.data.len(),
                n
            )));
        }
        if let Some(m) = &self.mask {
            if m.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "mask has {} entries but geometry implies {}",
                    m.len(),
                    n
                )));
            }
        }
        Ok(())
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[i])
    }

    pub fn valid_count(&self) -> usize {
        match &self.mask {
            None => self.data.len(),
            Some(m) => m.iter().filter(|&&v| v).count(),
        }
    }

    /// Root-mean-square over valid pixels.
    pub fn rms(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (i, &v) in self.data.iter().enumerate() {
            if self.is_valid(i) {
                sum += v * v;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            (sum / n as f64).sqrt()
        }
    }

    /// Largest value over valid pixels (0 if none).
    pub fn max_value(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, &v) in self.data.iter().enumerate() {
            if self.is_valid(i) {
                best = best.max(v);
            }
        }
        best
    }
}
