//! Builtin smoothing and adaptation setups.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::integrate::IntegratorConfig;
use crate::linalg::Vector;
use crate::mesh::{box_mesh_2d, box_mesh_3d, perturb_mesh, BoundaryPolicy, SimplicialMesh};
use crate::metric::{metric_from_nodal_values, MetricField, RegularizationAlpha};
use crate::mmpde::MmpdeProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Smooth2d,
    Smooth3d,
    SineWave,
    NineSpheres,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] =
        [ScenarioKind::Smooth2d, ScenarioKind::Smooth3d, ScenarioKind::SineWave, ScenarioKind::NineSpheres];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Smooth2d => "smooth2d",
            ScenarioKind::Smooth3d => "smooth3d",
            ScenarioKind::SineWave => "sinewave",
            ScenarioKind::NineSpheres => "ninespheres",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ScenarioKind::Smooth2d | ScenarioKind::SineWave => 2,
            ScenarioKind::Smooth3d | ScenarioKind::NineSpheres => 3,
        }
    }

    pub fn is_adaptation(self) -> bool {
        matches!(self, ScenarioKind::SineWave | ScenarioKind::NineSpheres)
    }

    /// Grid resolution per axis.
    pub fn default_size(self) -> usize {
        match self {
            ScenarioKind::Smooth2d => 16,
            ScenarioKind::Smooth3d => 8,
            ScenarioKind::SineWave => 24,
            ScenarioKind::NineSpheres => 16,
        }
    }

    pub fn default_tau(self) -> f64 {
        match self {
            ScenarioKind::SineWave => 0.01,
            _ => 1.0,
        }
    }

    pub fn default_boundary(self) -> BoundaryPolicy {
        match self {
            ScenarioKind::Smooth3d => BoundaryPolicy::Fixed,
            _ => BoundaryPolicy::Slide,
        }
    }

    pub fn default_config(self) -> IntegratorConfig {
        match self {
            ScenarioKind::Smooth2d | ScenarioKind::Smooth3d => IntegratorConfig {
                dt_init: 1e-3,
                dt_max: 0.5,
                t_end: 200.0,
                stop_rel_tol: 1e-10,
                stop_window: 20,
                ..Default::default()
            },
            ScenarioKind::SineWave => IntegratorConfig {
                dt_init: 1e-5,
                dt_max: 1e-1,
                t_end: 1.0,
                stop_rel_tol: 1e-9,
                stop_window: 20,
                ..Default::default()
            },
            ScenarioKind::NineSpheres => IntegratorConfig {
                dt_init: 1e-3,
                dt_max: 50.0,
                t_end: 5000.0,
                stop_rel_tol: 1e-9,
                stop_window: 20,
                ..Default::default()
            },
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario '{s}'")))
    }
}

/// `tanh(−20 (y − 0.5 − 0.25 sin 2πx))`
pub fn sine_wave_u(x: &Vector) -> f64 {
    (-20.0 * (x[1] - 0.5 - 0.25 * (2.0 * PI * x[0]).sin())).tanh()
}

/// Sum of nine `tanh(30 (|x − c|² − 0.1875))` terms, centered at the origin
/// and at `(±½, ±½, ±½)`.
pub fn nine_spheres_u(x: &Vector) -> f64 {
    let mut u = 0.0;
    let mut term = |c: [f64; 3]| {
        let r2: f64 = (0..3).map(|a| (x[a] - c[a]) * (x[a] - c[a])).sum();
        u += (30.0 * (r2 - 0.1875)).tanh();
    };
    term([0.0; 3]);
    for sx in [0.5, -0.5] {
        for sy in [0.5, -0.5] {
            for sz in [0.5, -0.5] {
                term([sx, sy, sz]);
            }
        }
    }
    u
}

#[derive(Clone, Debug)]
pub struct ScenarioOptions {
    pub size: Option<usize>,
    pub seed: u64,
    pub functional: Functional,
    pub tau: Option<f64>,
    pub boundary: Option<BoundaryPolicy>,
    /// Perturbation amplitude of the smoothing scenarios as a fraction of the
    /// grid spacing.
    pub perturbation: Option<f64>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            size: None,
            seed: 1,
            functional: Functional::huang_default(),
            tau: None,
            boundary: None,
            perturbation: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub problem: MmpdeProblem,
    pub config: IntegratorConfig,
    /// Regularization solve of the adaptation metric.
    pub alpha: Option<RegularizationAlpha>,
}

fn perturbed(mesh: &SimplicialMesh, amplitude: f64, seed: u64) -> Result<SimplicialMesh> {
    for k in 0..64 {
        let m = perturb_mesh(mesh, amplitude, seed.wrapping_add(k));
        if m.check_nonsingular().is_ok() {
            return Ok(m);
        }
    }
    Err(Error::InvalidConfig(format!("perturbation amplitude {amplitude} inverts elements for every seed tried")))
}

/// Adaptation problem on `mesh` for the nodal values of `u`.
pub fn adaptation_problem(
    mesh: SimplicialMesh,
    values: &[f64],
    functional: Functional,
    tau: f64,
) -> Result<(MmpdeProblem, RegularizationAlpha)> {
    let (metric, alpha) = metric_from_nodal_values(&mesh, values)?;
    Ok((MmpdeProblem::with_master_copies(mesh, metric, functional, tau)?, alpha))
}

pub fn build(kind: ScenarioKind, opts: &ScenarioOptions) -> Result<Scenario> {
    let n = opts.size.unwrap_or(kind.default_size());
    if n == 0 {
        return Err(Error::InvalidConfig("scenario size must be positive".into()));
    }
    let tau = opts.tau.unwrap_or(kind.default_tau());
    let policy = opts.boundary.unwrap_or(kind.default_boundary());
    let mut mesh = match kind {
        ScenarioKind::Smooth2d | ScenarioKind::SineWave => box_mesh_2d(n, [0.0, 0.0], [1.0, 1.0]),
        ScenarioKind::Smooth3d => box_mesh_3d(n, [0.0; 3], [1.0; 3]),
        ScenarioKind::NineSpheres => box_mesh_3d(n, [-1.0; 3], [1.0; 3]),
    };
    mesh.apply_box_policy(policy);
    let config = kind.default_config();
    let (problem, alpha) = match kind {
        ScenarioKind::Smooth2d | ScenarioKind::Smooth3d => {
            let frac = opts.perturbation.unwrap_or(if kind.dim() == 2 { 0.2 } else { 0.3 });
            let mesh = perturbed(&mesh, frac / n as f64, opts.seed)?;
            let d = mesh.dim();
            (MmpdeProblem::with_master_copies(mesh, MetricField::identity(d), opts.functional, tau)?, None)
        }
        ScenarioKind::SineWave | ScenarioKind::NineSpheres => {
            let u = if kind == ScenarioKind::SineWave { sine_wave_u } else { nine_spheres_u };
            let values: Vec<f64> = mesh.vertices.iter().map(u).collect();
            let (p, a) = adaptation_problem(mesh, &values, opts.functional, tau)?;
            (p, Some(a))
        }
    };
    Ok(Scenario { kind, problem, config, alpha })
}
