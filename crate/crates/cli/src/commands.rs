use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use mmpde_core::diagnostics::{
    check_lemma_fk1, check_lemma_fk2, quality_report, scaling_study, theorem_floors, LemmaReport, QualityReport,
};
use mmpde_core::integrate::IntegrationResult;
use mmpde_core::io::{read_mesh_files, read_nodal_field, write_atomic, write_mesh_files};
use mmpde_core::linalg::{self, Vector};
use mmpde_core::mesh::{box_mesh_2d, box_mesh_3d, perturb_mesh};
use mmpde_core::metric::metric_from_nodal_values;
use mmpde_core::scenario::{adaptation_problem, build};
use mmpde_core::{
    integrate, BoundaryConstraint, BoundaryPolicy, Error, Functional, IntegratorConfig, MetricField, MmpdeProblem,
    ScenarioKind, ScenarioOptions, SimplicialMesh, TerminationReason,
};

use crate::settings::Settings;
use crate::Status;

/// Accepted energy increases above this fraction of `|I_h|` are violations.
const MONOTONE_TOL: f64 = 1e-12;
const GRADCHECK_TOL: f64 = 1e-6;
const SLOPE_RANGE: (f64, f64) = (-1.4, -0.7);

enum Source {
    Builtin(ScenarioKind),
    Custom,
}

fn source(s: &Settings, default: ScenarioKind) -> Result<Source> {
    match s.scenario.as_deref() {
        Some("custom") => Ok(Source::Custom),
        Some(name) => Ok(Source::Builtin(name.parse()?)),
        None if s.mesh.is_some() => Ok(Source::Custom),
        None => Ok(Source::Builtin(default)),
    }
}

fn scenario_options(s: &Settings) -> Result<ScenarioOptions> {
    Ok(ScenarioOptions {
        size: s.size,
        seed: s.seed.unwrap_or(1),
        functional: s.functional()?,
        tau: s.tau,
        boundary: s.boundary()?,
        perturbation: s.perturbation,
    })
}

fn input_mesh(s: &Settings) -> Result<SimplicialMesh> {
    let Some(paths) = &s.mesh else { bail!("this scenario needs --mesh NODE ELE") };
    let mut mesh = read_mesh_files(&paths[0], &paths[1])
        .with_context(|| format!("reading mesh {} {}", paths[0].display(), paths[1].display()))?;
    mesh.apply_box_policy(s.boundary()?.unwrap_or(BoundaryPolicy::Slide));
    Ok(mesh)
}

fn input_field(s: &Settings, mesh: &SimplicialMesh) -> Result<Vec<f64>> {
    let Some(path) = &s.field else { bail!("custom adaptation needs --field FILE") };
    let text = fs::read_to_string(path).with_context(|| format!("reading field {}", path.display()))?;
    Ok(read_nodal_field(&text, mesh.num_vertices())?)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn smooth(s: &Settings) -> Result<Status> {
    let (problem, base) = match source(s, ScenarioKind::Smooth2d)? {
        Source::Builtin(kind) if kind.is_adaptation() => bail!("scenario {kind} is an adaptation scenario; use adapt"),
        Source::Builtin(kind) => {
            let sc = build(kind, &scenario_options(s)?)?;
            (sc.problem, sc.config)
        }
        Source::Custom => {
            let mesh = input_mesh(s)?;
            let d = mesh.dim();
            let p = MmpdeProblem::with_master_copies(mesh, MetricField::identity(d), s.functional()?, s.tau.unwrap_or(1.0))?;
            (p, ScenarioKind::Smooth2d.default_config())
        }
    };
    run_flow(&problem, &s.integrator(base)?, &s.out_dir(), "", false)
}

pub fn adapt(s: &Settings) -> Result<Status> {
    let (problem, base, alpha) = match source(s, ScenarioKind::SineWave)? {
        Source::Builtin(kind) if !kind.is_adaptation() => bail!("scenario {kind} is a smoothing scenario; use smooth"),
        Source::Builtin(kind) => {
            let sc = build(kind, &scenario_options(s)?)?;
            (sc.problem, sc.config, sc.alpha)
        }
        Source::Custom => {
            let mesh = input_mesh(s)?;
            let values = input_field(s, &mesh)?;
            let tau = s.tau.unwrap_or(ScenarioKind::SineWave.default_tau());
            let (p, a) = adaptation_problem(mesh, &values, s.functional()?, tau)?;
            (p, ScenarioKind::SineWave.default_config(), Some(a))
        }
    };
    let mut extra = String::new();
    if let Some(a) = alpha {
        let _ = writeln!(extra, "regularization_alpha={:.9e}", a.alpha);
        let _ = writeln!(extra, "regularization_residual={:.3e}", a.residual);
        let _ = writeln!(extra, "regularization_clamped={}", a.clamped);
        let _ = writeln!(extra, "regularization_degenerate_target={}", a.degenerate_target);
        if a.clamped || a.degenerate_target {
            eprintln!("warning: regularization parameter fell back to {}", a.alpha);
        }
    }
    run_flow(&problem, &s.integrator(base)?, &s.out_dir(), &extra, true)
}

/// Integrates, writes mesh, trace and quality files to `out`, and checks the
/// trace properties (and the volume/altitude floors if `floors`).
fn run_flow(problem: &MmpdeProblem, config: &IntegratorConfig, out: &Path, extra: &str, floors: bool) -> Result<Status> {
    let before = quality_report(&problem.mesh, &problem.metric)?;
    let result = integrate(problem, config)?;
    let after = quality_report(&result.mesh, &problem.metric)?;

    let mut summary = String::new();
    let mut failures = Vec::new();
    summary_of_run(&mut summary, &result, &before, &after);
    summary.push_str(extra);

    let increase = result.trace.max_relative_increase();
    if increase > MONOTONE_TOL {
        failures.push(format!("energy increased by {increase:e} relative"));
    }
    let k_min = result.trace.min_volume();
    if !(k_min > 0.0) {
        failures.push(format!("element volume reached {k_min:e}"));
    }
    if result.termination == TerminationReason::DtUnderflow {
        failures.push("time step underflow".to_string());
    }
    if floors {
        let initial = result.trace.rows[0].energy;
        match theorem_floors(problem, initial) {
            Ok(b) => {
                let a_min = result.trace.min_metric_altitude();
                let _ = writeln!(summary, "volume_floor={:.9e}", b.volume_floor);
                let _ = writeln!(summary, "altitude_floor={:.9e}", b.altitude_floor);
                if k_min < b.volume_floor {
                    failures.push(format!("min volume {k_min:e} below floor {:e}", b.volume_floor));
                }
                if a_min < b.altitude_floor {
                    failures.push(format!("min metric altitude {a_min:e} below floor {:e}", b.altitude_floor));
                }
            }
            Err(Error::NotCoercive) => summary.push_str("volume_floor=not_coercive\n"),
            Err(e) => return Err(e.into()),
        }
    }

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_mesh_files(&result.mesh, &out.join("mesh.node"), &out.join("mesh.ele")).context("writing mesh")?;
    write(out, "trace.csv", &result.trace.to_csv())?;
    write(out, "quality_before.txt", &before.to_kv())?;
    write(out, "quality_after.txt", &after.to_kv())?;
    write(out, "summary.txt", &summary)?;
    print!("{summary}");
    Ok(report_failures(&failures))
}

fn summary_of_run(s: &mut String, r: &IntegrationResult, before: &QualityReport, after: &QualityReport) {
    let first = &r.trace.rows[0];
    let last = r.trace.last().unwrap_or(first);
    let _ = writeln!(s, "termination={}", r.termination);
    let _ = writeln!(s, "t_final={:.9e}", last.t);
    let _ = writeln!(s, "steps={}", r.steps);
    let _ = writeln!(s, "rejections={}", r.rejections);
    let _ = writeln!(s, "I_h_initial={:.12e}", first.energy);
    let _ = writeln!(s, "I_h_final={:.12e}", last.energy);
    let _ = writeln!(s, "K_min_trace={:.9e}", r.trace.min_volume());
    let _ = writeln!(s, "grad_inf_final={:.9e}", last.grad_inf);
    let _ = writeln!(s, "volume_ratio={:.9e} -> {:.9e}", before.volume_ratio(), after.volume_ratio());
    if before.dim == 3 {
        let _ = writeln!(s, "dihedral_below_20={} -> {}", before.small_dihedral, after.small_dihedral);
        let _ = writeln!(s, "dihedral_above_150={} -> {}", before.large_dihedral, after.large_dihedral);
    }
}

fn report_failures(failures: &[String]) -> Status {
    if failures.is_empty() {
        Status::Ok
    } else {
        for f in failures {
            eprintln!("violation: {f}");
        }
        Status::Violation
    }
}

pub fn stats(s: &Settings) -> Result<Status> {
    let (mesh, metric) = match source(s, ScenarioKind::Smooth2d)? {
        Source::Builtin(kind) => {
            let sc = build(kind, &scenario_options(s)?)?;
            (sc.problem.mesh, sc.problem.metric)
        }
        Source::Custom => {
            let mesh = input_mesh(s)?;
            let metric = if s.field.is_some() {
                let values = input_field(s, &mesh)?;
                metric_from_nodal_values(&mesh, &values)?.0
            } else {
                MetricField::identity(mesh.dim())
            };
            (mesh, metric)
        }
    };
    let kv = quality_report(&mesh, &metric)?.to_kv();
    print!("{kv}");
    if let Some(out) = &s.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write(out, "stats.txt", &kv)?;
    }
    Ok(Status::Ok)
}

fn lemma_line(name: &str, r: &LemmaReport) -> String {
    format!(
        "{name} d={} samples={} violations={} worst_lower_margin={:.3e} worst_upper_margin={:.3e}",
        r.dim, r.samples, r.violations, r.worst_lower_margin, r.worst_upper_margin
    )
}

pub fn verify(s: &Settings) -> Result<Status> {
    let samples = s.samples.unwrap_or(10_000);
    let seed = s.seed.unwrap_or(1);
    let mut failures = Vec::new();
    let mut text = String::new();
    for d in [2, 3] {
        for (name, r) in [
            ("altitude_lemma", check_lemma_fk2(d, samples, seed)?),
            ("diameter_lemma", check_lemma_fk1(d, samples, seed.wrapping_add(1))?),
        ] {
            let _ = writeln!(text, "{}", lemma_line(name, &r));
            if r.violations > 0 {
                failures.push(format!("{name} d={d}: {} violations", r.violations));
            }
        }
    }
    let kind = match source(s, ScenarioKind::SineWave)? {
        Source::Builtin(k) => k,
        Source::Custom => bail!("verify takes a builtin scenario"),
    };
    let sc = build(kind, &scenario_options(s)?)?;
    let initial = sc.problem.discrete_functional()?;
    match theorem_floors(&sc.problem, initial) {
        Ok(b) => {
            let _ = writeln!(
                text,
                "floors scenario={kind} C1={:.6e} C2={:.6e} altitude_floor={:.6e} volume_floor={:.6e}",
                b.c1, b.c2, b.altitude_floor, b.volume_floor
            );
            let k_min = sc.problem.mesh.volumes().into_iter().fold(f64::INFINITY, f64::min);
            if !(b.volume_floor > 0.0 && b.altitude_floor > 0.0) || k_min < b.volume_floor {
                failures.push(format!("floors of {kind} are not positive or exceed the initial mesh"));
            }
        }
        Err(Error::NotCoercive) => {
            let _ = writeln!(text, "floors scenario={kind} not_coercive");
        }
        Err(e) => return Err(e.into()),
    }
    print!("{text}");
    if let Some(out) = &s.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write(out, "verify.txt", &text)?;
    }
    Ok(report_failures(&failures))
}

fn random_box_mesh(d: usize, seed: u64) -> SimplicialMesh {
    let n = if d == 2 { 3 + (seed % 3) as usize } else { 2 + (seed % 2) as usize };
    let mut m = if d == 2 { box_mesh_2d(n, [0.0, 0.0], [1.0, 1.0]) } else { box_mesh_3d(n, [0.0; 3], [1.0; 3]) };
    m.apply_box_policy(BoundaryPolicy::Slide);
    perturb_mesh(&m, 0.25 / n as f64, seed)
}

/// Relative `∞`-norm error between the assembled velocity and the balanced
/// finite-difference gradient, over free vertices.
fn gradcheck_error(mesh: &SimplicialMesh, f: Functional, tau: f64) -> Result<f64> {
    let d = mesh.dim();
    let p = MmpdeProblem::with_master_copies(mesh.clone(), MetricField::identity(d), f, tau)?;
    let x = &mesh.vertices;
    let v = p.assemble_velocities(x)?;
    let fd = p.fd_gradient(x, 1e-6)?;
    let bal = p.balance_factors(x)?;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 0..x.len() {
        if !matches!(mesh.constraints[i], BoundaryConstraint::Free) {
            continue;
        }
        let g: Vector = linalg::scale(&fd[i], -bal[i]);
        num = num.max(linalg::norm_inf(&linalg::sub(&v[i], &g)));
        den = den.max(linalg::norm_inf(&g));
    }
    Ok(if den > 0.0 { num / den } else { num })
}

pub fn gradcheck(s: &Settings) -> Result<Status> {
    let functionals = match s.requested_functional()? {
        Some(f) => vec![f],
        None => vec![Functional::Winslow, Functional::huang_default()],
    };
    let tau = s.tau.unwrap_or(1.0);
    let mut cases: Vec<(String, SimplicialMesh)> = Vec::new();
    if s.mesh.is_some() {
        cases.push(("input".into(), input_mesh(s)?));
    } else {
        let count = s.count.unwrap_or(10);
        let seed = s.seed.unwrap_or(1);
        for d in [2, 3] {
            for k in 0..count as u64 {
                cases.push((format!("d={d} seed={}", seed + k), random_box_mesh(d, seed + k)));
            }
        }
    }
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (label, mesh) in &cases {
        for &f in &functionals {
            let err = gradcheck_error(mesh, f, tau)?;
            println!("{label} functional={} rel_err={err:.3e}", f.name());
            worst = worst.max(err);
            if err > GRADCHECK_TOL {
                failures.push(format!("{label} functional={}: relative error {err:e}", f.name()));
            }
        }
    }
    println!("max_rel_err={worst:.3e} tol={GRADCHECK_TOL:e}");
    Ok(report_failures(&failures))
}

pub fn study(s: &Settings) -> Result<Status> {
    let kind = match source(s, ScenarioKind::SineWave)? {
        Source::Builtin(k) => k,
        Source::Custom => bail!("study takes a builtin scenario"),
    };
    let sizes = s.sizes.clone().unwrap_or_else(|| vec![8, 16, 32, 64]);
    let opts = scenario_options(s)?;
    let result = scaling_study(&sizes, |n| {
        let sc = build(kind, &ScenarioOptions { size: Some(n), ..opts.clone() })?;
        let config = s.integrator(sc.config).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok((sc.problem, config))
    })?;
    let csv = result.to_csv();
    print!("{csv}");
    println!("slope={:.6}", result.slope);
    let out = s.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write(&out, "study.csv", &csv)?;
    let mut failures = Vec::new();
    for (size, run) in sizes.iter().zip(&result.runs) {
        if run.trace.max_relative_increase() > MONOTONE_TOL || !(run.trace.min_volume() > 0.0) {
            failures.push(format!("size {size}: trace not monotone or not positive"));
        }
    }
    if kind.is_adaptation() && !(SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&result.slope) {
        failures.push(format!("slope {:.4} outside [{}, {}]", result.slope, SLOPE_RANGE.0, SLOPE_RANGE.1));
    }
    Ok(report_failures(&failures))
}
