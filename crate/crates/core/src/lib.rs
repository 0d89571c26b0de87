//! Mesh-based tomographic projection and reconstruction.
//!
//! The library models a scanned object as a set of closed triangle surfaces
//! with piecewise-constant attenuation and provides:
//!
//! - a rasterizing forward projector for parallel-beam geometries whose
//!   output is differentiable with respect to vertex positions and material
//!   attenuations ([`projector`]),
//! - an independent ray-casting projector used as a reference path and for
//!   generating synthetic scan data ([`raycast`]),
//! - gradient-based surface reconstruction with Laplacian, edge-length, and
//!   flatness regularization driven by Adam ([`shape_opt`]),
//! - a voxel-grid SIRT reconstruction baseline ([`baselines`]),
//! - file formats and scan metrics shared by the CLI ([`io`], [`metrics`]).
//!
//! All computation is `f64`; stored projection payloads are little-endian
//! `f32`. With the default `parallel` feature the per-angle loops run on
//! rayon; without it the same code runs sequentially. Per-angle partial
//! results are merged in angle order in both modes, so results do not depend
//! on the worker count.

pub use nalgebra;

pub mod baselines;
pub mod geometry;
pub mod io;
pub mod metrics;
mod parallel;
pub mod projector;
pub mod raycast;
pub mod shape_opt;

use std::path::PathBuf;

/// Unified error type for geometry validation, file formats, and solver
/// failure modes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("obj parse error at line {line}: {msg}")]
    ObjParse { line: usize, msg: String },
    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },
    #[error("stack payload size mismatch: header implies {expected} bytes, payload has {actual}")]
    PayloadSize { expected: u64, actual: u64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient at iteration {0}")]
    NonFiniteGradient(usize),
    #[error("mesh unrepairable at iteration {iteration}: {msg}")]
    Unrepairable { iteration: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
