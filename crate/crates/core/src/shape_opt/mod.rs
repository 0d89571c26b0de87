//! Gradient-based surface reconstruction from projection data.
//!
//! The objective combines a masked least-squares data term on the
//! rasterized projections with three surface regularizers:
//!
//! ```text
//! E = ‖p(V, μ) - p̂‖² + α·E_laplacian + β·E_edge + γ·E_flatten
//! ```
//!
//! [`objective`] evaluates the energy and its gradient with respect to the
//! vertex positions (and the attenuations). [`reconstruct`] runs Adam on
//! those gradients with an optional step-size schedule, uniform refinement,
//! and short-edge repair events; attenuations are clamped nonnegative and
//! the air material never moves.

mod adam;
mod energies;
pub mod gradcheck;
mod refine;

pub use adam::AdamState;
pub use energies::{edge_energy, flatten_energy, laplacian_energy};
pub use refine::{cleanup, refine, subdivide, RefineOutcome, SHORT_EDGE_FACTOR};

use crate::geometry::{MaterialTable, Mesh, ProjectionStack};
use crate::projector::{backward_from, forward_pass, GradientBundle};
use crate::{Error, Result};

/// Weights of the three regularizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for RegWeights {
    fn default() -> Self {
        RegWeights {
            alpha: 10.0,
            beta: 4.0,
            gamma: 0.01,
        }
    }
}

/// Energy breakdown plus the full gradient at one iterate.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub e_data: f64,
    pub e_lap: f64,
    pub e_edge: f64,
    pub e_flat: f64,
    /// `e_data + α·e_lap + β·e_edge + γ·e_flat`.
    pub total: f64,
    pub artifact_pixels: usize,
    pub grad: GradientBundle,
}

/// Evaluates the objective and its gradient.
///
/// The data term sums over pixels that are valid both in the measured stack
/// and in the current forward projection (parity-flagged pixels drop out),
/// with gradient `2(p - p̂)` per contributing pixel. Forward and backward use
/// one shared fragment set.
pub fn objective(
    mesh: &Mesh,
    materials: &MaterialTable,
    data: &ProjectionStack,
    reg: &RegWeights,
) -> Result<ObjectiveEval> {
    data.validate()?;
    let pass = forward_pass(mesh, materials, &data.geometry)?;
    let n = data.geometry.n_pixels();
    let mut e_data = 0.0;
    let mut d_p = vec![0.0f64; n];
    for i in 0..n {
        if data.is_valid(i) && pass.stack.is_valid(i) {
            let r = pass.stack.data[i] - data.data[i];
            e_data += r * r;
            d_p[i] = 2.0 * r;
        }
    }
    let mut grad = backward_from(&pass, mesh, materials, &data.geometry, &d_p)?;

    let (e_lap, g_lap) = laplacian_energy(mesh);
    let (e_edge, g_edge) = edge_energy(mesh);
    let (e_flat, g_flat) = flatten_energy(mesh);
    for k in 0..mesh.vertices.len() {
        grad.d_vertices[k] +=
            reg.alpha * g_lap[k] + reg.beta * g_edge[k] + reg.gamma * g_flat[k];
    }
    let total = e_data + reg.alpha * e_lap + reg.beta * e_edge + reg.gamma * e_flat;
    Ok(ObjectiveEval {
        e_data,
        e_lap,
        e_edge,
        e_flat,
        total,
        artifact_pixels: pass.diagnostics.artifact_pixels,
        grad,
    })
}

/// Reconstruction settings.
///
/// `schedule` lists `(iteration, multiplier)` pairs applied to the step size
/// when that iteration is reached. `refine_at` and `repair_at` trigger
/// uniform subdivision and short-edge cleanup before the listed iteration's
/// gradient step; both reset the Adam moments when they change the topology.
/// With `solve_mu` every material except air is optimized, starting from
/// `mu_init` (which always provides the full table, air included).
#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub schedule: Vec<(usize, f64)>,
    pub refine_at: Vec<usize>,
    pub repair_at: Vec<usize>,
    pub reg: RegWeights,
    pub solve_mu: bool,
    pub mu_init: Vec<f64>,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            iterations: 500,
            step_size: 0.01,
            schedule: vec![(400, 0.5)],
            refine_at: vec![60],
            repair_at: vec![60, 120, 180],
            reg: RegWeights::default(),
            solve_mu: false,
            mu_init: vec![0.0, 1.0],
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        for w in [self.reg.alpha, self.reg.beta, self.reg.gamma] {
            if w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "regularizer weights must be nonnegative, got {w}"
                )));
            }
        }
        for pair in self.schedule.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidConfig(
                    "schedule iterations must be strictly increasing".into(),
                ));
            }
        }
        if self.schedule.iter().any(|&(_, m)| !(m > 0.0)) {
            return Err(Error::InvalidConfig(
                "schedule multipliers must be positive".into(),
            ));
        }
        MaterialTable::new(self.mu_init.clone()).map(|_| ())
    }
}

/// One history row per iteration: raw component energies, the weighted
/// total, and the artifact-pixel count of that iteration's projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub e_data: f64,
    pub e_lap: f64,
    pub e_edge: f64,
    pub e_flat: f64,
    pub e_total: f64,
    pub artifact_pixels: usize,
}

/// Final state of a reconstruction run.
#[derive(Debug, Clone)]
pub struct ReconstructReport {
    pub mesh: Mesh,
    pub materials: MaterialTable,
    pub history: Vec<HistoryRow>,
    pub warnings: Vec<String>,
    /// Set when the run stopped early on an unrepairable mesh; the report
    /// then carries the best state seen so far.
    pub aborted: Option<String>,
    /// Soft convergence indicator: whether the total objective was
    /// non-increasing (within 5% jitter) over the last tenth of the run.
    pub tail_nonincreasing: bool,
}

fn flatten_params(mesh: &Mesh, materials: &MaterialTable, solve_ids: &[usize]) -> Vec<f64> {
    let mut p = Vec::with_capacity(3 * mesh.vertices.len() + solve_ids.len());
    for v in &mesh.vertices {
        p.extend([v.x, v.y, v.z]);
    }
    for &id in solve_ids {
        p.push(materials.mu[id]);
    }
    p
}

/// Runs Adam on the objective starting from `init`.
///
/// Deterministic: no randomness is involved, so equal inputs give identical
/// results. Gradient blow-ups abort with [`Error::NonFiniteGradient`]; an
/// unrepairable mesh ends the run early with the best-so-far state and a
/// diagnostic in `aborted`.
pub fn reconstruct(
    data: &ProjectionStack,
    init: &Mesh,
    config: &OptConfig,
) -> Result<ReconstructReport> {
    config.validate()?;
    data.validate()?;
    init.validate()?;
    let mut mesh = init.clone();
    let mut materials = MaterialTable::new(config.mu_init.clone())?;
    materials.covers(&mesh)?;
    let solve_ids: Vec<usize> = if config.solve_mu {
        (1..materials.len()).collect()
    } else {
        Vec::new()
    };

    let mut tau = config.step_size;
    let mut adam = AdamState::new(3 * mesh.vertices.len() + solve_ids.len());
    let mut history: Vec<HistoryRow> = Vec::with_capacity(config.iterations);
    let mut warnings = Vec::new();
    let mut best: Option<(f64, Mesh, MaterialTable)> = None;

    for it in 0..config.iterations {
        for &(at, mult) in &config.schedule {
            if at == it {
                tau *= mult;
            }
        }

        let mut topology_changed = false;
        if config.refine_at.contains(&it) {
            let out = refine(&mesh);
            if out.rolled_back {
                warnings.push(format!("iteration {it}: refinement rolled back"));
            } else {
                topology_changed = true;
                mesh = out.mesh;
            }
        }
        if config.repair_at.contains(&it) {
            let out = cleanup(&mesh);
            if out.rolled_back {
                warnings.push(format!("iteration {it}: repair rolled back"));
            } else if out.collapsed_edges > 0 {
                warnings.push(format!(
                    "iteration {it}: repair collapsed {} edges",
                    out.collapsed_edges
                ));
                topology_changed = true;
                mesh = out.mesh;
            }
        }
        if topology_changed {
            adam = AdamState::new(3 * mesh.vertices.len() + solve_ids.len());
            if !mesh.check_watertight().ok {
                let msg = format!("iteration {it}: mesh unrepairable after topology event");
                let (_, bm, bmat) = best.unwrap_or_else(|| {
                    (f64::INFINITY, init.clone(), materials.clone())
                });
                return Ok(ReconstructReport {
                    mesh: bm,
                    materials: bmat,
                    history,
                    warnings,
                    aborted: Some(msg),
                    tail_nonincreasing: false,
                });
            }
        }

        let eval = objective(&mesh, &materials, data, &config.reg)?;
        history.push(HistoryRow {
            iteration: it,
            e_data: eval.e_data,
            e_lap: eval.e_lap,
            e_edge: eval.e_edge,
            e_flat: eval.e_flat,
            e_total: eval.total,
            artifact_pixels: eval.artifact_pixels,
        });
        if !eval.grad.is_finite() {
            return Err(Error::NonFiniteGradient(it));
        }
        if best.as_ref().map_or(true, |(b, _, _)| eval.total < *b) {
            best = Some((eval.total, mesh.clone(), materials.clone()));
        }

        let mut params = flatten_params(&mesh, &materials, &solve_ids);
        let mut grad = Vec::with_capacity(params.len());
        for g in &eval.grad.d_vertices {
            grad.extend([g.x, g.y, g.z]);
        }
        for &id in &solve_ids {
            grad.push(eval.grad.d_mu[id]);
        }
        adam.step(&mut params, &grad, tau);
        for (k, v) in mesh.vertices.iter_mut().enumerate() {
            v.x = params[3 * k];
            v.y = params[3 * k + 1];
            v.z = params[3 * k + 2];
        }
        let off = 3 * mesh.vertices.len();
        for (s, &id) in solve_ids.iter().enumerate() {
            materials.mu[id] = params[off + s].max(0.0);
        }
    }

    let tail_start = config.iterations.saturating_sub((config.iterations / 10).max(2));
    let tail_nonincreasing = history[tail_start..]
        .windows(2)
        .all(|w| w[1].e_total <= 1.05 * w[0].e_total);

    Ok(ReconstructReport {
        mesh,
        materials,
        history,
        warnings,
        aborted: None,
        tail_nonincreasing,
    })
}
