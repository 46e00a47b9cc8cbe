use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anm_cli::mesh_io::{load_mesh, parse_coords};
use serde_json::Value;
use tempfile::TempDir;

fn anm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anm")).args(args).output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn bar(dir: &Path, cells: &str, size: &str, jitter: &str) -> String {
    let stem = dir.join("bar");
    let mut args = vec!["bar-mesh", "--cells"];
    args.extend(cells.split(' '));
    args.push("--size");
    args.extend(size.split(' '));
    args.extend(["--jitter", jitter, "--seed", "3", "--out", p(&stem)]);
    assert!(anm(&args).status.success());
    p(&stem).to_owned()
}

const NC_BAR: &str = r#"
gravity = [0.0, 0.0, -0.01]
[material]
model = "nc"
mu = 1.0
lambda = 2.0
[fixed]
box = { min = [-0.01, -1, -1], max = [0.01, 2, 2] }
"#;

fn config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    p(&path).to_owned()
}

fn solve(problem: &str, mesh: &str, cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["solve", problem, "--mesh", mesh, "--config", cfg, "--out", p(out)];
    args.extend(extra);
    anm(&args)
}

#[test]
fn toy_plain_and_equational() {
    let r = ok_json(&anm(&["toy", "--order", "20"]));
    assert!(r["iterations"].as_u64().unwrap() <= 3);
    assert_eq!(r["iterations"].as_u64().unwrap() as usize, r["steps"].as_array().unwrap().len());
    let res = r["residual_rms"].as_f64().unwrap();
    assert!(res <= 1e-5, "{res}");
    let s = r["solution"].as_array().unwrap();
    let (x, y) = (s[0].as_f64().unwrap(), s[1].as_f64().unwrap());
    let (fe, fc) = (anm_core::toy::f_e(x, y), anm_core::toy::f_c(x, y));
    assert!(fc.abs() <= 10.0 * res && fe.abs() <= 10.0 * res, "{fc} {fe}");

    let r = ok_json(&anm(&["toy", "--equational"]));
    assert!(r["residual_rms"].as_f64().unwrap() <= 1e-8);

    let r = ok_json(&anm(&["toy", "--no-pade"]));
    assert!(r["steps"].as_array().unwrap().iter().all(|s| s["kind"] == "taylor"));
}

#[test]
fn toy_rejects_low_order() {
    assert_eq!(anm(&["toy", "--order", "2"]).status.code(), Some(2));
}

#[test]
fn forward_without_load_returns_the_input_nodes() {
    let dir = TempDir::new().unwrap();
    let mesh = bar(dir.path(), "3 1 1", "3 1 1", "0.1");
    let cfg = config(dir.path(), "c.toml", &NC_BAR.replace("-0.01]", "0.0]"));
    let out = dir.path().join("out");
    let r = ok_json(&solve("forward", &mesh, &cfg, &out, &[]));
    assert_eq!(r["iterations"], 0);
    let before = load_mesh(Path::new(&mesh)).unwrap();
    let after = load_mesh(&out.join("result")).unwrap();
    assert_eq!(before.mesh.nodes, after.mesh.nodes);
    assert_eq!(before.mesh.tets, after.mesh.tets);
    assert_eq!(after.base, 1);
    let saved: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(saved["status"], "ok");
}

#[test]
fn deform_to_initial_handles_takes_no_steps() {
    let dir = TempDir::new().unwrap();
    let mesh = bar(dir.path(), "3 1 1", "3 1 1", "0");
    let cfg = config(
        dir.path(),
        "d.toml",
        r#"
[material]
model = "arap"
mu = 1.0
[fixed]
box = { min = [-0.01, -1, -1], max = [0.01, 2, 2] }
[[handles]]
box = { min = [2.99, -1, -1], max = [3.01, 2, 2] }
[[handles.waypoints]]
translate = [0, 0, 0]
"#,
    );
    let out = dir.path().join("out");
    let r = ok_json(&solve("deform", &mesh, &cfg, &out, &["--dump-steps"]));
    assert_eq!(r["iterations"], 0);
    assert!(r["steps"].as_array().unwrap().is_empty());
}

#[test]
fn deform_writes_every_step() {
    let dir = TempDir::new().unwrap();
    let mesh = bar(dir.path(), "3 1 1", "3 1 1", "0");
    let cfg = config(
        dir.path(),
        "d.toml",
        r#"
[material]
model = "nc"
mu = 1.0
lambda = 1.0
[fixed]
box = { min = [-0.01, -1, -1], max = [0.01, 2, 2] }
[[handles]]
box = { min = [2.99, -1, -1], max = [3.01, 2, 2] }
[[handles.waypoints]]
rotate = { axis = [1, 0, 0], angle_deg = 45, center = [3, 0.5, 0.5] }
"#,
    );
    let out = dir.path().join("out");
    let r = ok_json(&solve("deform", &mesh, &cfg, &out, &["--dump-steps"]));
    let n = r["iterations"].as_u64().unwrap() as usize;
    assert!(n > 0);
    assert!(r["residual_rms"].as_f64().unwrap() <= 1e-8);
    for i in 1..=n {
        assert!(out.join(format!("steps/step_{i:04}.vtk")).exists());
        let text = fs::read_to_string(out.join(format!("steps/step_{i:04}.txt"))).unwrap();
        assert_eq!(parse_coords(Path::new("s"), &text).unwrap().len(), 16);
    }
    assert!(!out.join(format!("steps/step_{:04}.vtk", n + 1)).exists());
    assert!(r["phases"].as_array().unwrap().iter().any(|p| p["label"] == "refine"));
}

#[test]
fn inverse_then_forward_recovers_the_target() {
    let dir = TempDir::new().unwrap();
    let mesh = bar(dir.path(), "6 2 2", "3 1 1", "0.1");
    let cfg = config(dir.path(), "c.toml", NC_BAR);
    let inv = dir.path().join("inv");
    ok_json(&solve("inverse", &mesh, &cfg, &inv, &[]));
    let fwd = dir.path().join("fwd");
    let rest = p(&inv.join("result")).to_owned();
    let masses = p(&inv.join("masses.txt")).to_owned();
    let r = ok_json(&solve("forward", &rest, &cfg, &fwd, &["--masses", &masses]));
    assert!(r["iterations"].as_u64().unwrap() > 0);
    let target = load_mesh(Path::new(&mesh)).unwrap().mesh.nodes;
    let got = parse_coords(Path::new("c"), &fs::read_to_string(fwd.join("coords.txt")).unwrap()).unwrap();
    let diag = (3.0f64 * 3.0 + 1.0 + 1.0).sqrt();
    let err = target
        .iter()
        .zip(&got)
        .map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    assert!(err <= 1e-6 * diag, "{err}");
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let mesh = bar(dir.path(), "2 1 1", "2 1 1", "0");
    let out = dir.path().join("out");

    let bad = config(dir.path(), "bad.toml", "[material]\nmodel = \"nc\"\nmu = 1\nshear = 2\n");
    let o = solve("forward", &mesh, &bad, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("shear"));

    fs::write(dir.path().join("broken.node"), "2 3 0 0\n1 0 0 0\n2 0 oops 0\n").unwrap();
    fs::write(dir.path().join("broken.ele"), "0 4 0\n").unwrap();
    let cfg = config(dir.path(), "c.toml", NC_BAR);
    let o = solve("forward", p(&dir.path().join("broken")), &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("broken.node:3"));

    let o = solve("forward", p(&dir.path().join("missing")), &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));

    let o = solve("deform", &mesh, &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));

    let short = config(dir.path(), "m.txt", "1.0\n");
    let o = solve("forward", &mesh, &cfg, &out, &["--masses", &short]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_3_with_report() {
    let dir = TempDir::new().unwrap();
    let mesh = bar(dir.path(), "2 1 1", "2 1 1", "0");
    let cfg = config(
        dir.path(),
        "half.toml",
        r#"
[material]
model = "arap"
mu = 1.0
[fixed]
box = { min = [-0.01, -1, -1], max = [0.01, 2, 2] }
[[handles]]
box = { min = [1.99, -1, -1], max = [2.01, 2, 2] }
[[handles.waypoints]]
rotate = { axis = [1, 0, 0], angle_deg = 180, center = [2, 0.5, 0.5] }
[solver]
max_chord_angle_deg = 180
"#,
    );
    let out = dir.path().join("out");
    let o = solve("deform", &mesh, &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["status"], "failed");
    assert_eq!(r["error"]["segment"], 1);
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, r);
}

#[test]
fn single_thread_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mesh = bar(dir.path(), "4 2 2", "2 1 1", "0.15");
    let cfg = config(dir.path(), "c.toml", &NC_BAR.replace("\"nc\"", "\"ni\""));
    let mut dumps = Vec::new();
    for (k, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("o{k}"));
        let o = anm(&[
            "--threads", threads, "solve", "forward", "--mesh", &mesh, "--config", &cfg, "--out", p(&out),
        ]);
        assert!(o.status.success());
        dumps.push((fs::read(out.join("coords.txt")).unwrap(), fs::read(out.join("result.vtk")).unwrap()));
    }
    assert_eq!(dumps[0], dumps[1]);
    assert_eq!(dumps[0], dumps[2]);
}
