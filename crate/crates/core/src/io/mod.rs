//! File formats shared by the library and the command-line tools.
//!
//! - TOML configs: scan geometry, scenes, and optimizer settings
//!   ([`config`]),
//! - projection stacks: a TOML header next to a raw little-endian `f32`
//!   payload ([`stack`]),
//! - a triangle-only OBJ subset for meshes ([`obj`]),
//! - a headerless CSV optimization history and a 16-bit PGM preview
//!   renderer (this module).
//!
//! All text output renders floating-point numbers with nine significant
//! digits via [`format_sig9`].

mod config;
mod obj;
mod stack;

pub use config::{read_opt_settings, read_scan_config, read_scene, OptSettings, Scene};
pub use obj::{read_obj, write_obj};
pub use stack::{read_stack, write_stack};

use crate::geometry::ProjectionStack;
use crate::shape_opt::HistoryRow;
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Formats a float with nine significant digits (scientific notation).
pub fn format_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Writes the per-iteration history as headerless CSV, one row per
/// iteration: `iteration, e_data, e_lap, e_edge, e_flat, e_total,
/// artifact_pixels`. The row count therefore equals the iteration count.
pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iteration,
            format_sig9(r.e_data),
            format_sig9(r.e_lap),
            format_sig9(r.e_edge),
            format_sig9(r.e_flat),
            format_sig9(r.e_total),
            r.artifact_pixels
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Renders one angle of a stack as a binary 16-bit PGM image.
///
/// Values are min–max normalized over the angle's pixels; masked pixels
/// render black. A constant image renders all black.
pub fn write_pgm(path: &Path, stack: &ProjectionStack, angle: usize) -> Result<()> {
    let geom = &stack.geometry;
    if angle >= geom.n_angles() {
        return Err(Error::InvalidConfig(format!(
            "angle {angle} out of range, stack has {}",
            geom.n_angles()
        )));
    }
    let per = geom.pixels_per_angle();
    let base = angle * per;
    let values: Vec<Option<f64>> = (0..per)
        .map(|i| stack.is_valid(base + i).then(|| stack.data[base + i]))
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.iter().flatten() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let span = hi - lo;
    let mut bytes = Vec::with_capacity(per * 2 + 32);
    bytes.extend_from_slice(format!("P5\n{} {}\n65535\n", geom.cols, geom.rows).as_bytes());
    for v in &values {
        let level: u16 = match v {
            Some(v) if span > 0.0 => ((v - lo) / span * 65535.0).round() as u16,
            _ => 0,
        };
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScanGeometry;

    #[test]
    fn sig9_keeps_nine_significant_digits() {
        assert_eq!(format_sig9(1.0), "1.00000000e0");
        assert_eq!(format_sig9(-0.000123456789), "-1.23456789e-4");
        assert_eq!(format_sig9(250.0), "2.50000000e2");
    }

    #[test]
    fn history_rows_map_one_to_one_to_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        let rows = vec![
            HistoryRow {
                iteration: 0,
                e_data: 1.5,
                e_lap: 0.25,
                e_edge: 3.0,
                e_flat: 0.125,
                e_total: 16.0,
                artifact_pixels: 0,
            },
            HistoryRow {
                iteration: 1,
                e_data: 0.75,
                e_lap: 0.25,
                e_edge: 3.0,
                e_flat: 0.125,
                e_total: 15.25,
                artifact_pixels: 2,
            },
        ];
        write_history(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "0,1.50000000e0,2.50000000e-1,3.00000000e0,1.25000000e-1,1.60000000e1,0");
        assert!(lines[1].starts_with("1,7.50000000e-1"));
        assert!(lines[1].ends_with(",2"));
    }

    #[test]
    fn pgm_renders_the_requested_angle_normalized() {
        let geom = ScanGeometry::circular(2, 0.0, 180.0, 2, 3, 0.1, 2.0).unwrap();
        let mut stack = ProjectionStack::zeros(geom);
        // Second angle ramps 0..5.
        for i in 0..6 {
            stack.data[6 + i] = i as f64;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("view.pgm");
        write_pgm(&path, &stack, 1).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n3 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        assert_eq!(px.len(), 12);
        assert_eq!(u16::from_be_bytes([px[0], px[1]]), 0);
        assert_eq!(u16::from_be_bytes([px[10], px[11]]), 65535);
        // Flat first angle renders black, not NaN garbage.
        write_pgm(&path, &stack, 0).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes[header.len()..].iter().all(|&b| b == 0));
    }
}
