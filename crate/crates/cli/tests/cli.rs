use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mmpde-mesh"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mmpde-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (status.code().unwrap(), String::from_utf8(stdout).unwrap(), String::from_utf8(stderr).unwrap())
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

#[test]
fn smooth_writes_outputs_and_converges() {
    let out = scratch("smooth");
    let (code, stdout, stderr) =
        run(bin().args(["smooth", "--size", "6", "--boundary", "fixed", "--out"]).arg(&out));
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(value(&stdout, "termination"), "converged");
    for f in ["mesh.node", "mesh.ele", "trace.csv", "quality_before.txt", "quality_after.txt", "summary.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,I_h,K_min,grad_inf,dt"));
    assert!(trace.trim_end().ends_with("# termination=converged"));
    let before: f64 = value(&fs::read_to_string(out.join("quality_before.txt")).unwrap(), "volume_ratio").parse().unwrap();
    let after: f64 = value(&fs::read_to_string(out.join("quality_after.txt")).unwrap(), "volume_ratio").parse().unwrap();
    assert!(after < before);

    // the written mesh reads back with the same statistics
    let (code, stats, _) = run(bin().args(["stats", "--mesh"]).arg(out.join("mesh.node")).arg(out.join("mesh.ele")));
    assert_eq!(code, 0);
    let reread: f64 = value(&stats, "volume_ratio").parse().unwrap();
    assert!((reread - after).abs() <= 1e-6 * after);
    fs::remove_dir_all(&out).unwrap();
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let out = scratch("config");
    let cfg = out.join("run.cfg");
    fs::write(&cfg, "scenario = smooth2d\nsize = 4\nboundary = fixed\nt_end = 0.5\n").unwrap();
    let (code, stdout, _) = run(bin().args(["smooth", "--config"]).arg(&cfg).args(["--t-end", "0.25", "--out"]).arg(&out));
    assert!(code == 0 || code == 1);
    let t: f64 = value(&stdout, "t_final").parse().unwrap();
    assert!(t <= 0.25 + 1e-12, "{t}");

    fs::write(&cfg, "speed = 3\n").unwrap();
    let (code, _, stderr) = run(bin().args(["smooth", "--config"]).arg(&cfg));
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown config key"));
    fs::remove_dir_all(&out).unwrap();
}

#[test]
fn usage_and_io_errors_exit_with_2() {
    let (code, _, _) = run(bin().args(["frobnicate"]));
    assert_eq!(code, 2);
    let (code, _, _) = run(bin().args(["stats", "--mesh", "/nonexistent/a.node", "/nonexistent/a.ele"]));
    assert_eq!(code, 2);
    let (code, _, _) = run(bin().args(["adapt", "--scenario", "smooth2d"]));
    assert_eq!(code, 2);
    let (code, _, _) = run(bin().args(["smooth", "--functional", "nope"]));
    assert_eq!(code, 2);
}

#[test]
fn adapt_custom_mesh_with_field() {
    let out = scratch("adapt");
    let mesh_dir = out.join("input");
    let (code, _, _) = run(
        bin().args(["smooth", "--size", "8", "--boundary", "fixed", "--t-end", "1e-3", "--out"]).arg(&mesh_dir),
    );
    assert_eq!(code, 0);
    let node = fs::read_to_string(mesh_dir.join("mesh.node")).unwrap();
    let mut field = String::new();
    for line in node.lines().skip(1) {
        let t: Vec<f64> = line.split_whitespace().map(|s| s.parse().unwrap()).collect();
        field.push_str(&format!("{}\n", (8.0 * (t[2] - 0.4 - 0.2 * t[1])).tanh()));
    }
    fs::write(out.join("u.txt"), field).unwrap();
    let (code, stdout, stderr) = run(bin()
        .args(["adapt", "--mesh"])
        .arg(mesh_dir.join("mesh.node"))
        .arg(mesh_dir.join("mesh.ele"))
        .arg("--field")
        .arg(out.join("u.txt"))
        .args(["--t-end", "0.05", "--out"])
        .arg(&out));
    assert_eq!(code, 0, "{stdout}\n{stderr}");
    let ih0: f64 = value(&stdout, "I_h_initial").parse().unwrap();
    let ih1: f64 = value(&stdout, "I_h_final").parse().unwrap();
    assert!(ih1 < ih0);
    assert!(value(&stdout, "volume_floor").parse::<f64>().unwrap() > 0.0);
    assert!(value(&stdout, "regularization_alpha").parse::<f64>().unwrap() > 0.0);
    fs::remove_dir_all(&out).unwrap();
}

#[test]
fn verify_and_gradcheck_pass() {
    let (code, stdout, _) = run(bin().args(["verify", "--samples", "500"]));
    assert_eq!(code, 0);
    assert_eq!(stdout.matches("violations=0").count(), 4);
    let (code, stdout, _) = run(bin().args(["gradcheck", "--count", "2", "--functional", "winslow"]));
    assert_eq!(code, 0);
    let err: f64 = stdout.lines().last().unwrap().split_whitespace().next().unwrap()["max_rel_err=".len()..]
        .parse()
        .unwrap();
    assert!(err <= 1e-6);
}

#[test]
fn study_writes_csv() {
    let out = scratch("study");
    let (code, stdout, _) = run(bin().args(["study", "--scenario", "smooth2d", "--sizes", "3,5", "--out"]).arg(&out));
    assert_eq!(code, 0);
    assert!(stdout.contains("slope="));
    let csv = fs::read_to_string(out.join("study.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "N,K_min,I_h_final,volume_floor,slope_running");
    assert_eq!(csv.lines().count(), 3);
    fs::remove_dir_all(&out).unwrap();
}

#[test]
fn runs_are_deterministic() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    for dir in [&a, &b] {
        let (code, _, _) = run(bin().args(["adapt", "--size", "6", "--t-end", "0.02", "--seed", "3", "--out"]).arg(dir));
        assert!(code == 0 || code == 1);
    }
    for f in ["trace.csv", "mesh.node"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    fs::remove_dir_all(&a).unwrap();
    fs::remove_dir_all(&b).unwrap();
}
