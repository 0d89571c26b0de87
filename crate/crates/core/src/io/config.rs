//! TOML configuration files: scan geometry, scenes, optimizer settings.
//!
//! A *scan config* describes a circular parallel-beam trajectory. A *scene*
//! lists closed surfaces with their material pair plus the material table;
//! mesh paths are resolved relative to the scene file. *Optimizer settings*
//! mirror [`OptConfig`] field by field, with every key optional.

use crate::geometry::{MaterialTable, Mesh, ScanGeometry};
use crate::io::obj::read_obj;
use crate::shape_opt::{OptConfig, RegWeights};
use crate::{Error, Result};
use serde::Deserialize;
use std::path::Path;

/// Attenuation assigned to materials marked `solve = true` before the
/// optimizer takes over.
pub const DEFAULT_SOLVE_MU: f64 = 0.5;

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Format {
        what,
        msg: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Scan geometry
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanConfigFile {
    n_angles: usize,
    angle_start_deg: f64,
    angle_end_deg: f64,
    rows: usize,
    cols: usize,
    pixel_pitch: f64,
    detector_distance: Option<f64>,
    beam: Option<String>,
}

fn build_scan(cfg: ScanConfigFile) -> Result<ScanGeometry> {
    if let Some(beam) = &cfg.beam {
        if beam != "parallel" {
            return Err(config_err(format!("unsupported beam model {beam:?}")));
        }
    }
    ScanGeometry::circular(
        cfg.n_angles,
        cfg.angle_start_deg,
        cfg.angle_end_deg,
        cfg.rows,
        cfg.cols,
        cfg.pixel_pitch,
        cfg.detector_distance.unwrap_or(2.0),
    )
}

/// Reads a circular-trajectory scan config.
pub fn read_scan_config(path: &Path) -> Result<ScanGeometry> {
    build_scan(read_toml(path, "scan config")?)
}

#[cfg(test)]
fn parse_scan_config(text: &str) -> Result<ScanGeometry> {
    build_scan(toml::from_str(text).map_err(|e| Error::Format {
        what: "scan config",
        msg: e.to_string(),
    })?)
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default)]
    object: Vec<ObjectEntry>,
    #[serde(default)]
    material: Vec<MaterialEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectEntry {
    mesh: String,
    interior: usize,
    /// Defaults to air.
    exterior: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialEntry {
    id: usize,
    mu: Option<f64>,
    solve: Option<bool>,
}

/// A scene ready for projection: the merged mesh, the material table, and
/// which materials the optimizer may change.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: Mesh,
    pub materials: MaterialTable,
    /// `solve[id]` is true for materials marked `solve = true`; air never
    /// is.
    pub solve: Vec<bool>,
}

impl Scene {
    pub fn any_solve(&self) -> bool {
        self.solve.iter().any(|&s| s)
    }
}

/// Reads a scene file and the meshes it references (relative to its
/// directory).
pub fn read_scene(path: &Path) -> Result<Scene> {
    let file: SceneFile = read_toml(path, "scene")?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    build_scene(file, |mesh_path| read_obj(&dir.join(mesh_path)))
}

fn build_scene(
    file: SceneFile,
    load_mesh: impl Fn(&str) -> Result<Mesh>,
) -> Result<Scene> {
    if file.object.is_empty() {
        return Err(config_err("scene declares no objects"));
    }
    let max_id = file
        .material
        .iter()
        .map(|m| m.id)
        .chain(
            file.object
                .iter()
                .flat_map(|o| [o.interior, o.exterior.unwrap_or(0)]),
        )
        .max()
        .unwrap_or(0);
    let mut mu = vec![None::<f64>; max_id + 1];
    let mut solve = vec![false; max_id + 1];
    // Air is always present.
    mu[0] = Some(0.0);
    for entry in &file.material {
        if entry.id == 0 {
            if entry.solve == Some(true) || entry.mu.is_some_and(|v| v != 0.0) {
                return Err(config_err(
                    "material 0 is air: its attenuation is fixed at zero",
                ));
            }
            continue;
        }
        if mu[entry.id].is_some() || solve[entry.id] {
            return Err(config_err(format!("material {} declared twice", entry.id)));
        }
        match (entry.mu, entry.solve.unwrap_or(false)) {
            (Some(v), false) => mu[entry.id] = Some(v),
            (None, true) => {
                mu[entry.id] = Some(DEFAULT_SOLVE_MU);
                solve[entry.id] = true;
            }
            (Some(_), true) => {
                return Err(config_err(format!(
                    "material {}: give either mu or solve = true, not both",
                    entry.id
                )))
            }
            (None, false) => {
                return Err(config_err(format!(
                    "material {}: needs mu or solve = true",
                    entry.id
                )))
            }
        }
    }
    let mu: Vec<f64> = mu
        .iter()
        .enumerate()
        .map(|(id, v)| {
            v.ok_or_else(|| config_err(format!("material {id} used but not declared")))
        })
        .collect::<Result<_>>()?;

    let mut mesh: Option<Mesh> = None;
    for entry in &file.object {
        let mut part = load_mesh(&entry.mesh)?;
        part.set_materials(entry.interior, entry.exterior.unwrap_or(0));
        match &mut mesh {
            Some(m) => m.merge(&part),
            None => mesh = Some(part),
        }
    }
    let mesh = mesh.unwrap();
    mesh.validate()?;
    let materials = MaterialTable::new(mu)?;
    materials.covers(&mesh)?;
    Ok(Scene {
        mesh,
        materials,
        solve,
    })
}

// ---------------------------------------------------------------------------
// Optimizer settings
// ---------------------------------------------------------------------------

/// One step-size change: multiply the current step by `multiply` when
/// iteration `at` is reached.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePoint {
    pub at: usize,
    pub multiply: f64,
}

/// Optimizer settings as read from disk; every field is optional and falls
/// back to the [`OptConfig`] default. [`OptSettings::resolve`] merges in
/// scene information: scene `solve` markers enable attenuation solving and
/// the scene material table seeds `mu_init`, unless the settings file sets
/// those keys explicitly.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptSettings {
    pub iterations: Option<usize>,
    pub step_size: Option<f64>,
    pub schedule: Option<Vec<SchedulePoint>>,
    pub refine_at: Option<Vec<usize>>,
    pub repair_at: Option<Vec<usize>>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub solve_mu: Option<bool>,
    pub mu_init: Option<Vec<f64>>,
}

impl OptSettings {
    pub fn resolve(&self, scene: Option<&Scene>) -> Result<OptConfig> {
        let d = OptConfig::default();
        let config = OptConfig {
            iterations: self.iterations.unwrap_or(d.iterations),
            step_size: self.step_size.unwrap_or(d.step_size),
            schedule: self
                .schedule
                .as_ref()
                .map(|s| s.iter().map(|p| (p.at, p.multiply)).collect())
                .unwrap_or(d.schedule),
            refine_at: self.refine_at.clone().unwrap_or(d.refine_at),
            repair_at: self.repair_at.clone().unwrap_or(d.repair_at),
            reg: RegWeights {
                alpha: self.alpha.unwrap_or(d.reg.alpha),
                beta: self.beta.unwrap_or(d.reg.beta),
                gamma: self.gamma.unwrap_or(d.reg.gamma),
            },
            solve_mu: self
                .solve_mu
                .unwrap_or_else(|| scene.is_some_and(Scene::any_solve)),
            mu_init: self
                .mu_init
                .clone()
                .or_else(|| scene.map(|s| s.materials.mu.clone()))
                .unwrap_or(d.mu_init),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Reads optimizer settings; an empty file yields all defaults.
pub fn read_opt_settings(path: &Path) -> Result<OptSettings> {
    read_toml(path, "optimizer settings")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_box;
    use crate::io::obj::write_obj;
    use nalgebra::Point3;

    fn unit_box(half: f64) -> crate::geometry::Mesh {
        make_box(Point3::new(-half, -half, -half), Point3::new(half, half, half))
    }

    #[test]
    fn scan_config_applies_defaults_and_validates() {
        let geom = parse_scan_config(
            "n_angles = 8\nangle_start_deg = 0.0\nangle_end_deg = 180.0\n\
             rows = 16\ncols = 24\npixel_pitch = 0.05\n",
        )
        .unwrap();
        assert_eq!(geom.n_angles(), 8);
        assert_eq!((geom.rows, geom.cols), (16, 24));
        // Default detector distance.
        assert!((geom.poses[0].p.coords.norm() - 2.0).abs() < 1e-12);

        assert!(parse_scan_config("n_angles = 4\n").is_err());
        assert!(parse_scan_config(
            "n_angles = 4\nangle_start_deg = 0.0\nangle_end_deg = 180.0\n\
             rows = 4\ncols = 4\npixel_pitch = 0.1\nbeam = \"cone\"\n"
        )
        .is_err());
        // Typos in key names are rejected rather than ignored.
        assert!(parse_scan_config(
            "n_angles = 4\nangle_start_deg = 0.0\nangle_end_deg = 180.0\n\
             rows = 4\ncols = 4\npixel_pitch = 0.1\npixelpitch = 0.2\n"
        )
        .is_err());
    }

    #[test]
    fn scene_merges_objects_and_builds_the_material_table() {
        let dir = tempfile::tempdir().unwrap();
        write_obj(&dir.path().join("outer.obj"), &unit_box(1.0)).unwrap();
        write_obj(&dir.path().join("inner.obj"), &unit_box(0.4)).unwrap();
        let scene_path = dir.path().join("scene.toml");
        std::fs::write(
            &scene_path,
            "[[object]]\nmesh = \"outer.obj\"\ninterior = 1\n\n\
             [[object]]\nmesh = \"inner.obj\"\ninterior = 2\nexterior = 1\n\n\
             [[material]]\nid = 1\nmu = 0.5\n\n\
             [[material]]\nid = 2\nsolve = true\n",
        )
        .unwrap();
        let scene = read_scene(&scene_path).unwrap();
        assert_eq!(scene.mesh.faces.len(), 24);
        assert_eq!(scene.materials.mu, vec![0.0, 0.5, DEFAULT_SOLVE_MU]);
        assert_eq!(scene.solve, vec![false, false, true]);
        assert!(scene.any_solve());
        assert_eq!(scene.mesh.face_materials[0], (1, 0));
        assert_eq!(scene.mesh.face_materials[23], (2, 1));
    }

    #[test]
    fn scene_validation_rejects_bad_material_tables() {
        let obj = |_: &str| Ok(unit_box(1.0));
        let parse = |text: &str| -> Result<Scene> {
            build_scene(toml::from_str::<SceneFile>(text).unwrap(), obj)
        };
        // Air cannot be solved for.
        assert!(parse(
            "[[object]]\nmesh = \"m\"\ninterior = 1\n\
             [[material]]\nid = 0\nsolve = true\n\
             [[material]]\nid = 1\nmu = 1.0\n"
        )
        .is_err());
        // Used but undeclared material.
        assert!(parse("[[object]]\nmesh = \"m\"\ninterior = 1\n").is_err());
        // mu and solve are mutually exclusive.
        assert!(parse(
            "[[object]]\nmesh = \"m\"\ninterior = 1\n\
             [[material]]\nid = 1\nmu = 1.0\nsolve = true\n"
        )
        .is_err());
        // Duplicate declaration.
        assert!(parse(
            "[[object]]\nmesh = \"m\"\ninterior = 1\n\
             [[material]]\nid = 1\nmu = 1.0\n\
             [[material]]\nid = 1\nmu = 2.0\n"
        )
        .is_err());
        // A well-formed scene passes.
        assert!(parse(
            "[[object]]\nmesh = \"m\"\ninterior = 1\n\
             [[material]]\nid = 1\nmu = 1.0\n"
        )
        .is_ok());
    }

    #[test]
    fn opt_settings_default_resolve_matches_the_library_default() {
        let settings: OptSettings = toml::from_str("").unwrap();
        assert_eq!(settings.resolve(None).unwrap(), OptConfig::default());
    }

    #[test]
    fn opt_settings_override_fields_and_inherit_scene_materials() {
        let settings: OptSettings = toml::from_str(
            "iterations = 100\nstep_size = 0.02\nalpha = 2.5\n\
             schedule = [{ at = 50, multiply = 0.25 }]\nrefine_at = [30]\n",
        )
        .unwrap();
        let obj = |_: &str| Ok(unit_box(1.0));
        let scene = build_scene(
            toml::from_str(
                "[[object]]\nmesh = \"m\"\ninterior = 1\n\
                 [[material]]\nid = 1\nsolve = true\n",
            )
            .unwrap(),
            obj,
        )
        .unwrap();
        let config = settings.resolve(Some(&scene)).unwrap();
        assert_eq!(config.iterations, 100);
        assert_eq!(config.step_size, 0.02);
        assert_eq!(config.reg.alpha, 2.5);
        assert_eq!(config.reg.beta, OptConfig::default().reg.beta);
        assert_eq!(config.schedule, vec![(50, 0.25)]);
        assert_eq!(config.refine_at, vec![30]);
        // Scene drives attenuation solving and the initial table.
        assert!(config.solve_mu);
        assert_eq!(config.mu_init, vec![0.0, DEFAULT_SOLVE_MU]);
    }

    #[test]
    fn resolve_rejects_inconsistent_merges() {
        let settings: OptSettings =
            toml::from_str("mu_init = [0.5, 1.0]\n").unwrap();
        // mu_init must start with air at zero.
        assert!(settings.resolve(None).is_err());
    }
}
