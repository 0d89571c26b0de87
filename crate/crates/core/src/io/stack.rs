//! Projection-stack container format.
//!
//! A stack named `scan.stack` is stored as three files:
//!
//! - `scan.stack` — TOML header: format tag, detector shape, pixel pitch,
//!   and one `[[pose]]` per angle (`r` is the column-major 3×3 detector
//!   basis — u axis, v axis, ray direction — and `p` the detector origin),
//! - `scan.stack.raw` — pixel payload, little-endian `f32`, angle-major
//!   then row-major,
//! - `scan.stack.mask` — one byte per pixel (nonzero = valid), present
//!   only when the header sets `has_mask`.
//!
//! Values compute as `f64` in memory, so a round trip quantizes the payload
//! to `f32`. Poses round-trip exactly.

use crate::geometry::{Beam, DetectorPose, ProjectionStack, ScanGeometry};
use crate::{Error, Result};
use nalgebra::{Matrix3, Point3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

const FORMAT_TAG: &str = "projection-stack";
const VERSION: u32 = 1;
const DTYPE: &str = "f32le";

#[derive(Serialize, Deserialize)]
struct StackHeader {
    format: String,
    version: u32,
    beam: String,
    n_angles: usize,
    rows: usize,
    cols: usize,
    pixel_pitch: f64,
    dtype: String,
    has_mask: bool,
    pose: Vec<PoseRecord>,
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    r: Vec<f64>,
    p: [f64; 3],
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format {
        what: "projection stack header",
        msg: msg.into(),
    }
}

/// Writes header, payload, and (if present) mask files for `stack`.
pub fn write_stack(path: &Path, stack: &ProjectionStack) -> Result<()> {
    stack.validate()?;
    let geom = &stack.geometry;
    let header = StackHeader {
        format: FORMAT_TAG.into(),
        version: VERSION,
        beam: match geom.beam {
            Beam::Parallel => "parallel".into(),
        },
        n_angles: geom.n_angles(),
        rows: geom.rows,
        cols: geom.cols,
        pixel_pitch: geom.pixel_pitch,
        dtype: DTYPE.into(),
        has_mask: stack.mask.is_some(),
        pose: geom
            .poses
            .iter()
            .map(|pose| PoseRecord {
                r: pose.r.as_slice().to_vec(),
                p: [pose.p.x, pose.p.y, pose.p.z],
            })
            .collect(),
    };
    let text = toml::to_string_pretty(&header)
        .map_err(|e| format_err(format!("serialization failed: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;

    let mut payload = Vec::with_capacity(stack.data.len() * 4);
    for &v in &stack.data {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let raw_path = sibling(path, ".raw");
    std::fs::write(&raw_path, payload).map_err(|e| Error::io(&raw_path, e))?;

    if let Some(mask) = &stack.mask {
        let bytes: Vec<u8> = mask.iter().map(|&m| m as u8).collect();
        let mask_path = sibling(path, ".mask");
        std::fs::write(&mask_path, bytes).map_err(|e| Error::io(&mask_path, e))?;
    }
    Ok(())
}

/// Reads a stack written by [`write_stack`].
pub fn read_stack(path: &Path) -> Result<ProjectionStack> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: StackHeader =
        toml::from_str(&text).map_err(|e| format_err(e.to_string()))?;
    if header.format != FORMAT_TAG {
        return Err(format_err(format!(
            "format tag {:?}, expected {FORMAT_TAG:?}",
            header.format
        )));
    }
    if header.version != VERSION {
        return Err(format_err(format!(
            "unsupported version {}, expected {VERSION}",
            header.version
        )));
    }
    if header.dtype != DTYPE {
        return Err(format_err(format!(
            "unsupported dtype {:?}, expected {DTYPE:?}",
            header.dtype
        )));
    }
    if header.beam != "parallel" {
        return Err(format_err(format!(
            "unsupported beam model {:?}",
            header.beam
        )));
    }
    if header.pose.len() != header.n_angles {
        return Err(format_err(format!(
            "{} poses for {} angles",
            header.pose.len(),
            header.n_angles
        )));
    }
    let mut poses = Vec::with_capacity(header.pose.len());
    for (i, rec) in header.pose.iter().enumerate() {
        if rec.r.len() != 9 {
            return Err(format_err(format!(
                "pose {i}: r has {} entries, expected 9",
                rec.r.len()
            )));
        }
        let r = Matrix3::from_column_slice(&rec.r);
        let p = Point3::new(rec.p[0], rec.p[1], rec.p[2]);
        poses.push(DetectorPose::new(r, p)?);
    }
    let geometry = ScanGeometry::new(poses, header.rows, header.cols, header.pixel_pitch)?;

    let raw_path = sibling(path, ".raw");
    let payload = std::fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let n = geometry.n_pixels();
    if payload.len() != 4 * n {
        return Err(Error::PayloadSize {
            expected: 4 * n as u64,
            actual: payload.len() as u64,
        });
    }
    let mut stack = ProjectionStack::zeros(geometry);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        stack.data[i] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
    }

    if header.has_mask {
        let mask_path = sibling(path, ".mask");
        let bytes = std::fs::read(&mask_path).map_err(|e| Error::io(&mask_path, e))?;
        if bytes.len() != n {
            return Err(Error::PayloadSize {
                expected: n as u64,
                actual: bytes.len() as u64,
            });
        }
        stack.mask = Some(bytes.iter().map(|&b| b != 0).collect());
    }
    stack.validate()?;
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stack(masked: bool) -> ProjectionStack {
        let geom = ScanGeometry::circular(3, 0.0, 180.0, 4, 5, 0.05, 2.0).unwrap();
        let mut stack = ProjectionStack::zeros(geom);
        for (i, v) in stack.data.iter_mut().enumerate() {
            *v = (i as f64) * 0.125 - 1.0;
        }
        if masked {
            let mut mask = vec![true; stack.data.len()];
            mask[7] = false;
            mask[33] = false;
            stack.mask = Some(mask);
        }
        stack
    }

    #[test]
    fn round_trip_preserves_payload_mask_and_poses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.stack");
        let stack = sample_stack(true);
        write_stack(&path, &stack).unwrap();
        let back = read_stack(&path).unwrap();
        // Values chosen above are exact in f32, so the round trip is exact.
        assert_eq!(back.data, stack.data);
        assert_eq!(back.mask, stack.mask);
        assert_eq!(back.geometry.rows, 4);
        assert_eq!(back.geometry.cols, 5);
        for (a, b) in back.geometry.poses.iter().zip(&stack.geometry.poses) {
            assert_eq!(a.r, b.r);
            assert_eq!(a.p, b.p);
        }
    }

    #[test]
    fn maskless_stacks_write_no_mask_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.stack");
        write_stack(&path, &sample_stack(false)).unwrap();
        assert!(!sibling(&path, ".mask").exists());
        let back = read_stack(&path).unwrap();
        assert!(back.mask.is_none());
    }

    #[test]
    fn truncated_payload_reports_both_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.stack");
        write_stack(&path, &sample_stack(false)).unwrap();
        let raw = sibling(&path, ".raw");
        let bytes = std::fs::read(&raw).unwrap();
        std::fs::write(&raw, &bytes[..bytes.len() - 5]).unwrap();
        match read_stack(&path).unwrap_err() {
            Error::PayloadSize { expected, actual } => {
                assert_eq!(expected, bytes.len() as u64);
                assert_eq!(actual, bytes.len() as u64 - 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn foreign_headers_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.stack");
        std::fs::write(&path, "format = \"something-else\"\n").unwrap();
        assert!(read_stack(&path).is_err());
    }

    #[test]
    fn writing_the_same_stack_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.stack");
        let b = dir.path().join("b.stack");
        let stack = sample_stack(true);
        write_stack(&a, &stack).unwrap();
        write_stack(&b, &stack).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(
            std::fs::read(sibling(&a, ".raw")).unwrap(),
            std::fs::read(sibling(&b, ".raw")).unwrap()
        );
        assert_eq!(
            std::fs::read(sibling(&a, ".mask")).unwrap(),
            std::fs::read(sibling(&b, ".mask")).unwrap()
        );
    }
}
