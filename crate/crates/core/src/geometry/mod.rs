//! Meshes, materials, detector poses, and projection stacks.
//!
//! Everything downstream (projection, reconstruction, baselines) works on the
//! types defined here. Objects live in a normalized global frame, typically
//! inside `(-1, 1)^3`; detectors are planar pixel grids posed by a rotation
//! and an offset.

mod mesh;
mod primitives;
mod scan;

pub use mesh::{MaterialTable, Mesh, WatertightReport};
pub use primitives::{make_box, make_icosphere, make_tetrahedron, make_torus};
pub use scan::{
    to_detector_frame, Beam, DetectorPose, DetectorVertices, ProjectionStack, ScanGeometry,
};

/// Relative factor for the 3D degenerate-face threshold: a face is treated as
/// degenerate when its area falls below `AREA_EPS_FACTOR * bbox_diagonal^2`.
pub const AREA_EPS_FACTOR: f64 = 1e-12;
