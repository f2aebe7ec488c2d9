//! Acceptance suite. Prints one line per criterion and exits nonzero if any fails.
//!
//! Run with `cargo test -p mmpde-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mmpde_core::diagnostics::{check_lemma_fk1, check_lemma_fk2, quality_report, scaling_study, theorem_floors};
use mmpde_core::linalg::{self, Vector};
use mmpde_core::mesh::{box_mesh_2d, box_mesh_3d, perturb_mesh};
use mmpde_core::metric::{recover_hessian, solve_regularization_alpha, NodalHessianField};
use mmpde_core::scenario::build;
use mmpde_core::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel_inf(a: &[Vector], b: &[Vector]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| linalg::norm_inf(&linalg::sub(x, y))).fold(0.0, f64::max);
    let den = b.iter().map(linalg::norm_inf).fold(0.0, f64::max);
    num / den
}

fn random_mesh(d: usize, seed: u64) -> SimplicialMesh {
    let n = if d == 2 { 3 + (seed % 3) as usize } else { 2 + (seed % 2) as usize };
    let mut m = if d == 2 { box_mesh_2d(n, [0.0, 0.0], [1.0, 1.0]) } else { box_mesh_3d(n, [0.0; 3], [1.0; 3]) };
    m.apply_box_policy(BoundaryPolicy::Slide);
    perturb_mesh(&m, 0.25 / n as f64, seed)
}

fn huang() -> Functional {
    Functional::huang_default()
}

fn criterion_1() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in [2, 3] {
        for seed in 0..10u64 {
            let mesh = random_mesh(d, 100 + seed);
            for f in [Functional::Winslow, huang()] {
                let p = MmpdeProblem::with_master_copies(mesh.clone(), MetricField::identity(d), f, 0.7)?;
                let x = &mesh.vertices;
                let v = p.assemble_velocities(x)?;
                let fd = p.fd_gradient(x, 1e-6)?;
                let bal = p.balance_factors(x)?;
                let free: Vec<usize> =
                    (0..x.len()).filter(|&i| matches!(mesh.constraints[i], BoundaryConstraint::Free)).collect();
                let a: Vec<Vector> = free.iter().map(|&i| v[i]).collect();
                let b: Vec<Vector> = free.iter().map(|&i| linalg::scale(&fd[i], -bal[i])).collect();
                worst = worst.max(rel_inf(&a, &b));
            }
        }
    }
    Ok(outcome(worst <= 1e-6, format!("max relative error {worst:.3e} (tol 1e-6)")))
}

fn criterion_2() -> Result<Outcome> {
    let mut violations = 0;
    let mut parts = Vec::new();
    for d in [2, 3] {
        let a = check_lemma_fk2(d, 10_000, 7)?;
        let b = check_lemma_fk1(d, 10_000, 11)?;
        violations += a.violations + b.violations;
        parts.push(format!("d={d}: altitude {} / diameter {} violations", a.violations, b.violations));
    }
    Ok(outcome(violations == 0, parts.join(", ")))
}

struct Run3 {
    kind: ScenarioKind,
    problem: MmpdeProblem,
    result: mmpde_core::integrate::IntegrationResult,
}

fn run_3() -> Result<Vec<Run3>> {
    [ScenarioKind::SineWave, ScenarioKind::NineSpheres]
        .into_iter()
        .map(|kind| {
            let s = build(kind, &ScenarioOptions::default())?;
            let result = integrate(&s.problem, &s.config)?;
            Ok(Run3 { kind, problem: s.problem, result })
        })
        .collect()
}

fn criterion_3(runs: &[Run3]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let inc = r.result.trace.max_relative_increase();
        let kmin = r.result.trace.min_volume();
        pass &= inc <= 1e-12 && kmin > 0.0;
        parts.push(format!(
            "{}: {} steps, I_h {:.6e} -> {:.6e}, max rel increase {inc:.1e}, min |K| {kmin:.3e}",
            r.kind,
            r.result.steps,
            r.result.trace.rows[0].energy,
            r.result.trace.last().map_or(f64::NAN, |t| t.energy),
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_4(runs: &[Run3]) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let i0 = r.result.trace.rows[0].energy;
        match theorem_floors(&r.problem, i0) {
            Ok(b) => {
                let kmin = r.result.trace.min_volume();
                let amin = r.result.trace.min_metric_altitude();
                pass &= kmin >= b.volume_floor && amin >= b.altitude_floor;
                parts.push(format!(
                    "{}: min |K| {kmin:.3e} >= {:.3e}, min a_K {amin:.3e} >= {:.3e}",
                    r.kind, b.volume_floor, b.altitude_floor
                ));
            }
            Err(Error::NotCoercive) => parts.push(format!("{}: not coercive, no floor", r.kind)),
            Err(e) => return Err(e),
        }
    }
    Ok(outcome(pass, parts.join("; ")))
}

fn criterion_5() -> Result<Outcome> {
    let study = scaling_study(&[8, 16, 32, 64], |n| {
        let s = build(ScenarioKind::SineWave, &ScenarioOptions { size: Some(n), ..Default::default() })?;
        Ok((s.problem, s.config))
    })?;
    let pts: Vec<String> = study.rows.iter().map(|r| format!("N={} |K|_min={:.3e}", r.n_elements, r.k_min)).collect();
    let pass = (-1.4..=-0.7).contains(&study.slope);
    Ok(outcome(pass, format!("slope {:.3} in [-1.4, -0.7]; {}", study.slope, pts.join(", "))))
}

/// The 2D smoothing run with fixed boundary vertices.
fn run_6_2d() -> Result<(MmpdeProblem, mmpde_core::integrate::IntegrationResult)> {
    let s = build(
        ScenarioKind::Smooth2d,
        &ScenarioOptions { boundary: Some(BoundaryPolicy::Fixed), ..Default::default() },
    )?;
    let r = integrate(&s.problem, &s.config)?;
    Ok((s.problem, r))
}

fn criterion_6(p2: &MmpdeProblem, r2: &mmpde_core::integrate::IntegrationResult) -> Result<Outcome> {
    let q0 = quality_report(&p2.mesh, &p2.metric)?;
    let q1 = quality_report(&r2.mesh, &p2.metric)?;
    let ok2 = r2.termination == TerminationReason::Converged && q1.volume_ratio() <= 0.5 * q0.volume_ratio();

    let s3 = build(ScenarioKind::Smooth3d, &ScenarioOptions::default())?;
    let r3 = integrate(&s3.problem, &s3.config)?;
    let a = quality_report(&s3.problem.mesh, &s3.problem.metric)?;
    let b = quality_report(&r3.mesh, &s3.problem.metric)?;
    let ok3 = b.small_dihedral < a.small_dihedral && b.large_dihedral < a.large_dihedral;
    Ok(outcome(
        ok2 && ok3,
        format!(
            "2D {} ratio {:.4} -> {:.6}; 3D small {} -> {}, large {} -> {}",
            r2.termination,
            q0.volume_ratio(),
            q1.volume_ratio(),
            a.small_dihedral,
            b.small_dihedral,
            a.large_dihedral,
            b.large_dihedral
        ),
    ))
}

fn criterion_7() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let d = if i % 2 == 0 { 2 } else { 3 };
        let mesh = random_mesh(d, 500 + i);
        let h = Functional::huang(2.0 / d as f64, 0.5)?;
        let ih = MmpdeProblem::with_master_copies(mesh.clone(), MetricField::identity(d), h, 1.0)?.discrete_functional()?;
        let iw = MmpdeProblem::with_master_copies(mesh, MetricField::identity(d), Functional::Winslow, 1.0)?
            .discrete_functional()?;
        worst = worst.max((ih - 0.5 * iw).abs() / (0.5 * iw).abs());
    }
    Ok(outcome(worst <= 1e-12, format!("max relative difference {worst:.3e} (tol 1e-12)")))
}

fn criterion_8() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for d in [2, 3] {
        let mesh = random_mesh(d, 900 + d as u64);
        let base = MetricField::analytic(d, move |x| {
            let mut m = linalg::Mat::identity(d);
            m[(0, 0)] = 1.0 + 4.0 * x[0] * x[0];
            m[(0, 1)] = 0.3 * x[1];
            m[(1, 0)] = 0.3 * x[1];
            m[(1, 1)] = 2.0 + x[0];
            m
        });
        for f in [Functional::Winslow, huang()] {
            let v0 = MmpdeProblem::with_master_copies(mesh.clone(), base.clone(), f, 1.0)?.assemble_velocities(&mesh.vertices)?;
            for c in [0.1, 7.0] {
                let v = MmpdeProblem::with_master_copies(mesh.clone(), base.scaled(c), f, 1.0)?
                    .assemble_velocities(&mesh.vertices)?;
                worst = worst.max(rel_inf(&v, &v0));
            }
        }
    }
    Ok(outcome(worst <= 1e-12, format!("max relative difference {worst:.3e} (tol 1e-12)")))
}

fn criterion_9(p2: &MmpdeProblem, r2: &mmpde_core::integrate::IntegrationResult) -> Result<Outcome> {
    let v = p2.assemble_velocities(&r2.mesh.vertices)?;
    let vmax = v.iter().map(linalg::norm_inf).fold(0.0, f64::max);
    let bound = 1e-4 * p2.mesh.diameter() / p2.tau;
    let converged = r2.termination == TerminationReason::Converged;
    Ok(outcome(
        converged && vmax <= bound,
        format!("termination {}, max |v| {vmax:.3e} <= {bound:.3e}", r2.termination),
    ))
}

fn criterion_10() -> Result<Outcome> {
    let mut pass = true;
    let mesh = box_mesh_2d(10, [0.0, 0.0], [1.0, 1.0]);
    let mut alpha_err: f64 = 0.0;
    for c in [1.0, 4.0, 0.25] {
        let hessians = NodalHessianField { dim: 2, hessians: vec![linalg::Mat::scalar(2, c); mesh.num_vertices()] };
        let a = solve_regularization_alpha(&mesh, &hessians);
        let expect = (2f64.powf(1.5) - 1.0) * c;
        alpha_err = alpha_err.max((a.alpha - expect).abs() / expect);
    }
    pass &= alpha_err <= 1e-6;

    let mut hess_err: f64 = 0.0;
    for d in [2, 3] {
        let mesh = random_mesh(d, 42 + d as u64);
        let q = |x: &Vector| 1.5 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] * x[1] + 2.0 * x[1] * x[2] - 0.7 * x[2] * x[2] + x[0];
        let values: Vec<f64> = mesh.vertices.iter().map(q).collect();
        let field = recover_hessian(&mesh, &values)?;
        let mut exact = linalg::Mat::zeros(d);
        exact[(0, 0)] = 3.0;
        exact[(0, 1)] = -1.0;
        exact[(1, 0)] = -1.0;
        exact[(1, 1)] = 1.0;
        if d == 3 {
            exact[(1, 2)] = 2.0;
            exact[(2, 1)] = 2.0;
            exact[(2, 2)] = -1.4;
        }
        for h in &field.hessians {
            hess_err = hess_err.max((*h - exact).frobenius() / exact.frobenius());
        }
    }
    pass &= hess_err <= 1e-8;
    Ok(outcome(pass, format!("alpha rel error {alpha_err:.3e} (tol 1e-6), Hessian rel error {hess_err:.3e} (tol 1e-8)")))
}

fn report(n: usize, limit: Option<Duration>, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let o = f().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    let took = start.elapsed();
    let in_time = limit.map_or(true, |l| took <= l);
    let pass = o.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / budget {}s", l.as_secs()));
    println!(
        "criterion {n:>2} ... {}  [{:.1}s{budget}] {}",
        if pass { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        o.detail
    );
    pass
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut all = true;
    all &= report(1, Some(secs(60)), criterion_1);
    all &= report(2, Some(secs(30)), criterion_2);

    let start = Instant::now();
    let runs = run_3();
    let run3_time = start.elapsed();
    match runs {
        Ok(runs) => {
            all &= report(3, Some(secs(600).saturating_sub(run3_time)), || Ok(criterion_3(&runs)));
            all &= report(4, None, || criterion_4(&runs));
        }
        Err(e) => {
            println!("criterion  3 ... FAIL  runs failed: {e}");
            println!("criterion  4 ... FAIL  runs failed: {e}");
            all = false;
        }
    }
    println!("             (runs for criteria 3 and 4 took {:.1}s / budget 600s)", run3_time.as_secs_f64());

    all &= report(5, Some(secs(900)), criterion_5);

    let start = Instant::now();
    let run6 = run_6_2d();
    let run6_time = start.elapsed();
    match run6 {
        Ok((p2, r2)) => {
            all &= report(6, Some(secs(300).saturating_sub(run6_time)), || criterion_6(&p2, &r2));
            all &= report(7, None, criterion_7);
            all &= report(8, None, criterion_8);
            all &= report(9, None, || criterion_9(&p2, &r2));
        }
        Err(e) => {
            println!("criterion  6 ... FAIL  run failed: {e}");
            report(7, None, criterion_7);
            report(8, None, criterion_8);
            println!("criterion  9 ... FAIL  run failed: {e}");
            all = false;
        }
    }
    all &= report(10, None, criterion_10);

    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
