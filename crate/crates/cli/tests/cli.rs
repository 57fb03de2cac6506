use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const SQUARE: &str = r#"{"type": "polytope", "vertices": [[0,0],[1,0],[1,1],[0,1]]}"#;
const DISC: &str = r#"{"type": "ball", "center": [0, 0], "radius": 1}"#;
const BALL3: &str = r#"{"type": "ball", "center": [0, 0, 0], "radius": 1}"#;
const CAP: &str = r#"{"type": "hull", "base": {"type": "ball", "center": [0,0,0], "radius": 1}, "points": [[2,0,0]]}"#;
const CUBE: &str = r#"{"type": "polytope", "vertices": [[0,0,0],[1,0,0],[0,1,0],[0,0,1],[1,1,0],[1,0,1],[0,1,1],[1,1,1]]}"#;

fn file(name: &str, text: &str) -> String {
    // tests share file names; write then rename so readers never see a partial file
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(name);
    let tmp = dir.join(format!("{name}.{:?}", std::thread::current().id()));
    fs::write(&tmp, text).unwrap();
    fs::rename(&tmp, &path).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relconvex")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn planar(cmd: &str) -> Vec<String> {
    vec![cmd.into(), "--body".into(), file("square.json", SQUARE), "--gauge".into(), file("disc.json", DISC)]
}

fn with<'a>(base: &'a [String], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().map(String::as_str).chain(extra.iter().copied()).collect()
}

#[test]
fn mixed_volumes_of_the_square() {
    let base = planar("mixedvol");
    let csv = stdout(&with(&base, &["--seed", "3", "--samples", "1000000"]));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("j,V_j,stderr"));
    let expected = [std::f64::consts::PI, 2.0, 1.0];
    for (j, line) in lines.enumerate() {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(f[0] as usize, j);
        assert!((f[1] - expected[j]).abs() < 4.0 * f[2], "V_{j} = {} +- {}", f[1], f[2]);
    }
}

#[test]
fn distances_to_the_square() {
    let points = file("points.txt", "2,0.5\n# interior\n0.5,0.5\n");
    let base = planar("dist");
    let csv = stdout(&with(&base, &["--seed", "1", "--points", &points]));
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 0.0);
    // no relative normal inside K
    assert_eq!(rows[1][7], "");
}

#[test]
fn oracle_for_the_square() {
    let base = planar("oracle");
    let json: Value = serde_json::from_str(&stdout(&with(&base, &["--seed", "1", "--delta", "1"]))).unwrap();
    let value = |q: &str| json.as_array().unwrap().iter().find(|r| r["quantity"] == q).unwrap()["value"].as_f64().unwrap();
    assert_eq!(value("area"), 1.0);
    assert_eq!(value("perimeter"), 4.0);
    assert!((value("parallel_area(1)") - (5.0 + std::f64::consts::PI)).abs() < 1e-12);
}

#[test]
fn output_is_reproducible_across_workers() {
    let base = planar("measures");
    let common = with(&base, &["--seed", "11", "--samples", "200000", "--cells", "8"]);
    let first = stdout(&common);
    assert_eq!(first, stdout(&common));
    for workers in ["1", "3"] {
        let mut args = common.clone();
        args.extend(["--workers", workers]);
        assert_eq!(first, stdout(&args), "workers = {workers}");
    }
    let out = file("measures.csv", "");
    let mut args = common.clone();
    args.extend(["--out", &out]);
    assert!(stdout(&args).is_empty());
    assert_eq!(fs::read_to_string(&out).unwrap(), first);
}

#[test]
fn exit_codes() {
    let base = planar("measures");
    let bad = file("bad.json", r#"{"type": "ball", "center": [0, 0], "radius": -1}"#);
    // missing seed
    assert_eq!(run(&with(&base, &[])).status.code(), Some(1));
    assert_eq!(run(&["measures", "--body", &bad, "--gauge", &bad, "--seed", "1"]).status.code(), Some(1));
    assert_eq!(run(&["measures", "--no-such-flag"]).status.code(), Some(1));
    let out = run(&with(&planar("mixedvol"), &["--seed", "1", "--t-grid", "0.5,0.5000001,4"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ill conditioned"));
}

fn theorem_check(body: &str, name: &str) -> Value {
    let args = [
        "theorem-check",
        "--body",
        &file(name, body),
        "--gauge",
        &file("ball3.json", BALL3),
        "--k",
        "1",
        "--seed",
        "7",
        "--samples",
        "2000000",
        "--cells",
        "32",
    ];
    serde_json::from_str(&stdout(&args)).unwrap()
}

#[test]
fn cap_body_is_tangential() {
    let v = theorem_check(CAP, "cap.json");
    assert_eq!(v["verdict"], "proportional");
    assert!((v["c"].as_f64().unwrap() - 1.0).abs() < 0.05);
    assert_eq!(v["mixed_volumes"]["tangential"]["k"], 1);
    assert_eq!(v["mixed_volumes"]["chain_equal_from_k"], true);
}

#[test]
fn cube_is_not_tangential() {
    let v = theorem_check(CUBE, "cube.json");
    assert_eq!(v["verdict"], "not proportional");
    assert_eq!(v["mixed_volumes"]["chain_equal_from_k"], false);
}
