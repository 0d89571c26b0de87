//! Triangle-only OBJ reader and writer.
//!
//! The reader accepts `v x y z` and `f a b c` statements with 1-based
//! indices in any of the `i`, `i/t`, `i//n`, `i/t/n` forms and silently
//! skips every other statement (normals, texture coordinates, groups,
//! comments). Faces must be triangles. The writer emits `v` and `f` lines
//! only; material assignments are not part of OBJ and belong to the scene
//! file, so meshes read back with the default material pair.

use crate::geometry::Mesh;
use crate::{Error, Result};
use nalgebra::Point3;
use std::path::Path;

fn parse_coord(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::ObjParse {
        line,
        msg: format!("invalid coordinate {tok:?}"),
    })
}

fn parse_index(tok: &str, line: usize) -> Result<usize> {
    // `i`, `i/t`, `i//n`, `i/t/n` — the vertex index is the first field.
    let first = tok.split('/').next().unwrap_or("");
    let idx: i64 = first.parse().map_err(|_| Error::ObjParse {
        line,
        msg: format!("invalid face index {tok:?}"),
    })?;
    if idx < 1 {
        return Err(Error::ObjParse {
            line,
            msg: format!("face indices must be positive and 1-based, got {idx}"),
        });
    }
    Ok((idx - 1) as usize)
}

/// Reads a triangle mesh from an OBJ file.
pub fn read_obj(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

/// Parses OBJ text; see [`read_obj`].
pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut c = [0.0f64; 3];
                for slot in &mut c {
                    let tok = toks.next().ok_or_else(|| Error::ObjParse {
                        line,
                        msg: "vertex needs three coordinates".into(),
                    })?;
                    *slot = parse_coord(tok, line)?;
                }
                // A fourth (w) coordinate, if present, is ignored.
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = toks
                    .map(|t| parse_index(t, line))
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(Error::ObjParse {
                        line,
                        msg: format!("only triangles are supported, face has {} vertices", idx.len()),
                    });
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            if v >= vertices.len() {
                return Err(Error::ObjParse {
                    line: 0,
                    msg: format!(
                        "face {fi} references vertex {} but only {} vertices are defined",
                        v + 1,
                        vertices.len()
                    ),
                });
            }
        }
    }
    Ok(Mesh::new(vertices, faces))
}

/// Writes a mesh as OBJ with nine-decimal coordinates.
pub fn write_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 16);
    for v in &mesh.vertices {
        out.push_str(&format!("v {:.9} {:.9} {:.9}\n", v.x, v.y, v.z));
    }
    for f in &mesh.faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
