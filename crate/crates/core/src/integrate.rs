//! Time stepping for the mesh equation with monotone energy.
//!
//! A step is accepted only if the functional does not increase, every element
//! keeps a positive volume and no vertex moves farther than a fraction of the
//! smallest altitude in its patch. Rejections halve the step.

use std::fmt;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{self, factorial, Vector};
use crate::mesh::{check_positive, gradients_from_inverse, SimplicialMesh};
use crate::mmpde::{Evaluation, MmpdeProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    ForwardEuler,
    /// Explicit midpoint with an embedded Euler error estimate.
    Rk2Adaptive,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" | "forward-euler" => Ok(Scheme::ForwardEuler),
            "rk2" | "rk2-adaptive" => Ok(Scheme::Rk2Adaptive),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Step reduction on rejection.
    pub energy_backtrack_factor: f64,
    /// Step growth after `grow_after` consecutive acceptances.
    pub grow_factor: f64,
    pub grow_after: usize,
    pub t_end: f64,
    pub stop_rel_tol: f64,
    pub stop_window: usize,
    /// Largest allowed vertex displacement as a fraction of the smallest
    /// altitude in the vertex patch.
    pub displacement_fraction: f64,
    /// Local error tolerance of the RK2 scheme, relative to the mesh diameter.
    pub rk2_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::ForwardEuler,
            dt_init: 1e-3,
            dt_min: 1e-14,
            dt_max: 1.0,
            energy_backtrack_factor: 0.5,
            grow_factor: 1.2,
            grow_after: 5,
            t_end: 1.0,
            stop_rel_tol: 1e-8,
            stop_window: 10,
            displacement_fraction: 0.4,
            rk2_tol: 1e-3,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("need 0 < dt_min <= dt_init <= dt_max");
        }
        if !(self.energy_backtrack_factor > 0.0 && self.energy_backtrack_factor < 1.0) {
            return bad("energy_backtrack_factor must lie in (0, 1)");
        }
        if !(self.grow_factor >= 1.0) {
            return bad("grow_factor must be at least 1");
        }
        if !(self.stop_rel_tol > 0.0) || self.stop_window == 0 {
            return bad("stop_rel_tol must be positive and stop_window nonzero");
        }
        if !(self.t_end > 0.0) {
            return bad("t_end must be positive");
        }
        if !(self.displacement_fraction > 0.0) || !(self.rk2_tol > 0.0) {
            return bad("displacement_fraction and rk2_tol must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rejection {
    EnergyIncrease { delta: f64 },
    ElementInversion { element: usize },
    ExcessiveDisplacement { vertex: usize },
    LocalError { estimate: f64 },
}

#[derive(Clone, Debug)]
pub enum StepOutcome {
    Accepted { positions: Vec<Vector>, energy: f64 },
    Rejected(Rejection),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    TimeLimit,
    DtUnderflow,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::Converged => "converged",
            TerminationReason::TimeLimit => "time_limit",
            TerminationReason::DtUnderflow => "dt_underflow",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub energy: f64,
    pub k_min: f64,
    /// `‖dx/dt‖_∞` of the constrained velocity.
    pub grad_inf: f64,
    /// Step that produced this state (0 for the initial row).
    pub dt: f64,
    /// Smallest metric altitude `a_{K,M_K}`.
    pub a_min: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EnergyTrace {
    pub rows: Vec<TraceRow>,
    pub termination: Option<TerminationReason>,
}

impl EnergyTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,I_h,K_min,grad_inf,dt\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", r.t, r.energy, r.k_min, r.grad_inf, r.dt);
        }
        if let Some(t) = self.termination {
            let _ = writeln!(s, "# termination={t}");
        }
        s
    }

    /// Largest relative increase of `I_h` between consecutive rows.
    pub fn max_relative_increase(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy) / w[0].energy.abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_volume(&self) -> f64 {
        self.rows.iter().map(|r| r.k_min).fold(f64::INFINITY, f64::min)
    }

    pub fn min_metric_altitude(&self) -> f64 {
        self.rows.iter().map(|r| r.a_min).fold(f64::INFINITY, f64::min)
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

#[derive(Clone, Debug)]
pub struct IntegrationResult {
    pub mesh: SimplicialMesh,
    pub trace: EnergyTrace,
    pub termination: TerminationReason,
    pub steps: usize,
    pub rejections: usize,
}

/// Current configuration of the flow.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub positions: Vec<Vector>,
    pub eval: Evaluation,
}

impl FlowState {
    pub fn new(problem: &MmpdeProblem, positions: Vec<Vector>) -> Result<Self> {
        check_positive(&problem.mesh, &positions)?;
        let eval = problem.evaluate(&positions)?;
        Ok(FlowState { t: 0.0, positions, eval })
    }
}

/// Smallest Euclidean altitude over the elements around each vertex.
fn patch_min_altitudes(mesh: &SimplicialMesh, positions: &[Vector]) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; positions.len()];
    for k in 0..mesh.num_elements() {
        let e = mesh.simplex_at(positions, k).edge_matrix();
        let Some(einv) = e.inverse() else { continue };
        let g = gradients_from_inverse(&einv);
        let amin = g[..=mesh.dim()].iter().map(|v| 1.0 / linalg::norm(v)).fold(f64::INFINITY, f64::min);
        for &v in mesh.element(k) {
            out[v] = out[v].min(amin);
        }
    }
    out
}

fn displace(x: &[Vector], dt: f64, v: &[Vector]) -> Vec<Vector> {
    x.iter().zip(v).map(|(a, b)| linalg::axpy(a, dt, b)).collect()
}

/// Gates a proposed configuration against the state it came from.
fn gate(problem: &MmpdeProblem, state: &FlowState, proposal: Vec<Vector>, fraction: f64) -> Result<StepOutcome> {
    let alt = patch_min_altitudes(&problem.mesh, &state.positions);
    for (i, (a, b)) in state.positions.iter().zip(&proposal).enumerate() {
        if linalg::norm(&linalg::sub(a, b)) > fraction * alt[i] {
            return Ok(StepOutcome::Rejected(Rejection::ExcessiveDisplacement { vertex: i }));
        }
    }
    match check_positive(&problem.mesh, &proposal) {
        Ok(()) => {}
        Err(Error::DegenerateElement { element, .. } | Error::InvertedElement { element, .. }) => {
            return Ok(StepOutcome::Rejected(Rejection::ElementInversion { element }))
        }
        Err(e) => return Err(e),
    }
    let energy = problem.energy_at(&proposal)?;
    if !(energy <= state.eval.energy) {
        return Ok(StepOutcome::Rejected(Rejection::EnergyIncrease { delta: energy - state.eval.energy }));
    }
    Ok(StepOutcome::Accepted { positions: proposal, energy })
}

/// One step of size `dt` from `state`.
pub fn step(problem: &MmpdeProblem, state: &FlowState, dt: f64, config: &IntegratorConfig) -> Result<StepOutcome> {
    let v = &state.eval.velocity;
    let proposal = match config.scheme {
        Scheme::ForwardEuler => displace(&state.positions, dt, v),
        Scheme::Rk2Adaptive => {
            let mid = displace(&state.positions, 0.5 * dt, v);
            if let Err(Error::DegenerateElement { element, .. } | Error::InvertedElement { element, .. }) =
                check_positive(&problem.mesh, &mid)
            {
                return Ok(StepOutcome::Rejected(Rejection::ElementInversion { element }));
            }
            let vm = problem.assemble_velocities(&mid)?;
            let estimate = v
                .iter()
                .zip(&vm)
                .map(|(a, b)| dt * linalg::norm_inf(&linalg::sub(a, b)))
                .fold(0.0, f64::max);
            if estimate > config.rk2_tol * problem.mesh.diameter() {
                return Ok(StepOutcome::Rejected(Rejection::LocalError { estimate }));
            }
            displace(&state.positions, dt, &vm)
        }
    };
    gate(problem, state, proposal, config.displacement_fraction)
}

fn record(problem: &MmpdeProblem, state: &FlowState, dt: f64) -> Result<TraceRow> {
    let mesh = &problem.mesh;
    let metrics = problem.element_metrics(&state.positions)?;
    let mut k_min = f64::INFINITY;
    let mut a_min = f64::INFINITY;
    let df = factorial(mesh.dim());
    for k in 0..mesh.num_elements() {
        let s = mesh.simplex_at(&state.positions, k);
        k_min = k_min.min(s.edge_matrix().det() / df);
        a_min = a_min.min(s.metric_min_altitude(&metrics[k])?);
    }
    let grad_inf = state.eval.velocity.iter().map(linalg::norm_inf).fold(0.0, f64::max);
    Ok(TraceRow { t: state.t, energy: state.eval.energy, k_min, grad_inf, dt, a_min })
}

/// Integrates from the problem's mesh until convergence, `t_end`, or step
/// underflow. Convergence means the relative decrease of `I_h` over the last
/// `stop_window` accepted steps is below `stop_rel_tol`, or an exactly zero
/// velocity field.
pub fn integrate(problem: &MmpdeProblem, config: &IntegratorConfig) -> Result<IntegrationResult> {
    config.validate()?;
    let mut state = FlowState::new(problem, problem.mesh.vertices.clone())?;
    let mut trace = EnergyTrace::default();
    trace.rows.push(record(problem, &state, 0.0)?);
    let mut dt = config.dt_init;
    let mut streak = 0usize;
    let mut steps = 0usize;
    let mut rejections = 0usize;
    let termination = loop {
        if state.t >= config.t_end * (1.0 - 1e-12) {
            break TerminationReason::TimeLimit;
        }
        if state.eval.velocity.iter().all(|v| *v == [0.0; 3]) {
            break TerminationReason::Converged;
        }
        let h = dt.min(config.t_end - state.t);
        match step(problem, &state, h, config)? {
            StepOutcome::Accepted { positions, energy } => {
                let eval = problem.evaluate(&positions)?;
                debug_assert!(eval.energy.is_finite() && energy.is_finite());
                state = FlowState { t: state.t + h, positions, eval };
                trace.rows.push(record(problem, &state, h)?);
                steps += 1;
                streak += 1;
                if streak >= config.grow_after {
                    dt = (dt * config.grow_factor).min(config.dt_max);
                    streak = 0;
                }
                let n = trace.rows.len();
                if n > config.stop_window {
                    let old = trace.rows[n - 1 - config.stop_window].energy;
                    let new = trace.rows[n - 1].energy;
                    if (old - new) / old.abs().max(f64::MIN_POSITIVE) < config.stop_rel_tol {
                        break TerminationReason::Converged;
                    }
                }
            }
            StepOutcome::Rejected(_) => {
                rejections += 1;
                streak = 0;
                dt *= config.energy_backtrack_factor;
                if dt < config.dt_min {
                    break TerminationReason::DtUnderflow;
                }
            }
        }
    };
    trace.termination = Some(termination);
    Ok(IntegrationResult {
        mesh: problem.mesh.with_vertices(state.positions),
        trace,
        termination,
        steps,
        rejections,
    })
}
