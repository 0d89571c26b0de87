//! Command-line front end for mesh-based tomographic reconstruction.
//!
//! Every subcommand reads and writes the formats defined in
//! `meshtomo-core::io`: TOML scan/scene/optimizer configs, OBJ meshes, and
//! projection stacks (TOML header plus raw `f32` payload). Floating-point
//! output uses nine significant digits. All commands are deterministic for
//! fixed inputs, seeds, and flags, independent of `--threads`.

use anyhow::{anyhow, bail, Result};
use clap::{Parser, Subcommand};
use meshtomo_core::baselines::{sirt, voxel_forward, VoxelVolume};
use meshtomo_core::geometry::{make_icosphere, MaterialTable, Mesh, ScanGeometry};
use meshtomo_core::io::{
    format_sig9, read_obj, read_opt_settings, read_scan_config, read_scene, read_stack,
    write_history, write_obj, write_pgm, write_stack, OptSettings,
};
use meshtomo_core::metrics::residual_projection_error;
use meshtomo_core::projector::forward_pass;
use meshtomo_core::raycast::{add_noise, cast_forward_full};
use meshtomo_core::shape_opt::gradcheck::run_full_check;
use meshtomo_core::nalgebra::Point3;
use meshtomo_core::shape_opt::reconstruct;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "meshtomo",
    version,
    about = "Mesh-based tomographic projection and reconstruction"
)]
struct Cli {
    /// Worker threads for per-angle parallelism (0 = automatic). Results
    /// do not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate scan data with the ray-casting reference projector.
    Simulate {
        /// Scan geometry config (TOML).
        #[arg(long)]
        geometry: PathBuf,
        /// Scene file (TOML).
        #[arg(long)]
        scene: PathBuf,
        /// Output stack path; `.raw`/`.mask` siblings are written next to it.
        #[arg(long)]
        output: PathBuf,
        /// Gaussian noise level relative to the clean-signal RMS.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Noise seed; equal seeds give bit-identical stacks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Project a scene with the differentiable rasterizing projector.
    Project {
        #[arg(long)]
        geometry: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Reconstruct a surface from measured data by gradient descent.
    Reconstruct {
        /// Measured projection stack.
        #[arg(long)]
        data: PathBuf,
        /// Initial surface (OBJ). Defaults to the scene mesh when --scene
        /// is given.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Scene file providing the material table (and, without --init,
        /// the starting surface).
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Optimizer settings (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output mesh (OBJ).
        #[arg(long)]
        output: PathBuf,
        /// Optional per-iteration history (CSV, one row per iteration).
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Reconstruct on a voxel grid with SIRT as a baseline.
    Sirt {
        #[arg(long)]
        data: PathBuf,
        /// Cubic grid resolution over (-1, 1)^3.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        /// Optionally write the reprojection of the reconstructed volume.
        #[arg(long)]
        reproject: Option<PathBuf>,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        /// Scene to check; defaults to a built-in sphere phantom.
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Scan geometry; defaults to 8 angles over 180 degrees on a
        /// 32x32 detector.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Random directions per check.
        #[arg(long, default_value_t = 5)]
        directions: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print the residual distance between two projection stacks.
    Metric {
        a: PathBuf,
        b: PathBuf,
    },
    /// Render one angle of a stack as a 16-bit PGM image.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        angle: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if cli.threads > 0 {
        use anyhow::Context;
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("failed to configure the thread pool")?;
    }
    run(cli.command)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            geometry,
            scene,
            output,
            noise,
            seed,
        } => {
            let geom = read_scan_config(&geometry)?;
            let scene = read_scene(&scene)?;
            let cast = cast_forward_full(&scene.mesh, &scene.materials, &geom)?;
            let stack = if noise > 0.0 {
                add_noise(&cast.stack, noise, seed)
            } else {
                cast.stack
            };
            write_stack(&output, &stack)?;
            println!(
                "simulated {} angles of {}x{} pixels",
                geom.n_angles(),
                geom.rows,
                geom.cols
            );
            println!(
                "recast pixels: {}  masked pixels: {}",
                cast.recast_pixels, cast.masked_pixels
            );
            println!("valid-pixel rms: {}", format_sig9(stack.rms()));
            println!("wrote {}", output.display());
            Ok(())
        }
        Command::Project {
            geometry,
            scene,
            output,
        } => {
            let geom = read_scan_config(&geometry)?;
            let scene = read_scene(&scene)?;
            let pass = forward_pass(&scene.mesh, &scene.materials, &geom)?;
            write_stack(&output, &pass.stack)?;
            let d = &pass.diagnostics;
            println!(
                "covered pixels: {}  artifact pixels: {}  degenerate faces: {}",
                d.covered_pixels, d.artifact_pixels, d.degenerate_faces
            );
            if d.broken_mesh_suspected() {
                eprintln!(
                    "warning: more than {:.0}% of covered pixels are artifacts; \
                     the mesh is probably not closed",
                    100.0 * meshtomo_core::projector::BROKEN_MESH_ARTIFACT_FRACTION
                );
            }
            println!("wrote {}", output.display());
            Ok(())
        }
        Command::Reconstruct {
            data,
            init,
            scene,
            config,
            output,
            history,
        } => {
            let stack = read_stack(&data)?;
            let scene = scene.map(|p| read_scene(&p)).transpose()?;
            let init_mesh: Mesh = match (&init, &scene) {
                (Some(path), _) => read_obj(path)?,
                (None, Some(s)) => s.mesh.clone(),
                (None, None) => bail!("give --init or --scene for the starting surface"),
            };
            let settings = config
                .map(|p| read_opt_settings(&p))
                .transpose()?
                .unwrap_or_else(OptSettings::default);
            let opt = settings.resolve(scene.as_ref())?;
            let report = reconstruct(&stack, &init_mesh, &opt)?;
            write_obj(&output, &report.mesh)?;
            if let Some(path) = &history {
                write_history(path, &report.history)?;
            }
            for w in &report.warnings {
                eprintln!("note: {w}");
            }
            if let Some(msg) = &report.aborted {
                eprintln!("warning: stopped early: {msg}");
            } else if !report.tail_nonincreasing {
                eprintln!("warning: objective was still moving at the end of the run");
            }
            let last = report
                .history
                .last()
                .ok_or_else(|| anyhow!("empty optimization history"))?;
            println!(
                "iterations: {}  vertices: {}  faces: {}",
                report.history.len(),
                report.mesh.vertices.len(),
                report.mesh.faces.len()
            );
            println!(
                "final energies: data {}  laplacian {}  edge {}  flatness {}  total {}",
                format_sig9(last.e_data),
                format_sig9(last.e_lap),
                format_sig9(last.e_edge),
                format_sig9(last.e_flat),
                format_sig9(last.e_total)
            );
            println!(
                "final attenuations: [{}]",
                report
                    .materials
                    .mu
                    .iter()
                    .map(|&m| format_sig9(m))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!("wrote {}", output.display());
            Ok(())
        }
        Command::Sirt {
            data,
            grid,
            iterations,
            reproject,
        } => {
            let stack = read_stack(&data)?;
            let initial = VoxelVolume::cube(grid, 1.0)?;
            let report = sirt(&stack, initial, iterations)?;
            let first = report.residuals[0];
            let last = *report.residuals.last().unwrap();
            println!(
                "sirt on a {grid}^3 grid, {} updates",
                report.residuals.len() - 1
            );
            println!(
                "residual: {} -> {}",
                format_sig9(first),
                format_sig9(last)
            );
            if report.stopped_early {
                eprintln!("warning: residual diverged; returned the best earlier iterate");
            }
            if let Some(path) = reproject {
                let fwd = voxel_forward(&report.volume, &stack.geometry)?;
                write_stack(&path, &fwd)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Gradcheck {
            scene,
            geometry,
            directions,
            seed,
        } => {
            let (mesh, materials) = match scene {
                Some(path) => {
                    let s = read_scene(&path)?;
                    (s.mesh, s.materials)
                }
                None => (
                    make_icosphere(2, 0.6, Point3::origin()),
                    MaterialTable::new(vec![0.0, 1.0])?,
                ),
            };
            let geom: ScanGeometry = match geometry {
                Some(path) => read_scan_config(&path)?,
                None => ScanGeometry::circular(8, 0.0, 180.0, 32, 32, 0.05, 2.0)?,
            };
            let lines = run_full_check(&mesh, &materials, &geom, directions, seed)?;
            let mut failures = 0;
            for line in &lines {
                let verdict = if line.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {}: max rel err {} (tolerance {}, {} samples)",
                    line.name,
                    format_sig9(line.max_rel_err),
                    format_sig9(line.tolerance),
                    line.samples
                );
                if !line.passed() {
                    failures += 1;
                }
            }
            if failures > 0 {
                bail!("{failures} gradient check(s) failed");
            }
            Ok(())
        }
        Command::Metric { a, b } => {
            let sa = read_stack(&a)?;
            let sb = read_stack(&b)?;
            println!("{}", format_sig9(residual_projection_error(&sa, &sb)?));
            Ok(())
        }
        Command::Render {
            input,
            angle,
            output,
        } => {
            let stack = read_stack(&input)?;
            write_pgm(&output, &stack, angle)?;
            println!("wrote {}", output.display());
            Ok(())
        }
    }
}
