use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gatsbi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gatsbi")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scene_path(name: &str) -> String {
    format!("{}/scenes/{name}.scene", env!("CARGO_MANIFEST_DIR"))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// Singleton clusters at the given points, coordinates only.
fn dump(points: &[[f64; 3]]) -> String {
    let mut t = format!(
        "NAME : t\nTYPE : GTSP\nDIMENSION : {}\nGTSP_SETS : {}\nNODE_COORD_SECTION\n",
        points.len(),
        points.len()
    );
    for (i, p) in points.iter().enumerate() {
        t.push_str(&format!("{} {} {} {}\n", i + 1, p[0], p[1], p[2]));
    }
    t.push_str("GTSP_SET_SECTION\n");
    for i in 1..=points.len() {
        t.push_str(&format!("{i} {i} -1\n"));
    }
    t + "EOF\n"
}

fn cost(o: &Output) -> f64 {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("cost "))
        .unwrap()
        .parse()
        .unwrap()
}

const LONE: &str = "res 1\ndims 11 11 6\n6 6 2 I\n";

#[test]
fn finished_run_writes_all_artifacts() {
    let dir = TempDir::new().unwrap();
    let scene = write(dir.path(), "lone.scene", LONE);
    let out = dir.path().join("out");
    let o = gatsbi(&[
        "run",
        "--scene",
        &scene,
        "--start",
        "2.5,2.5,2.5,45",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "trace.jsonl", "path.csv", "table.md"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "finished");
    assert_eq!(report["inspected"], 1);
    let trace = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), report["iterations"].as_u64().unwrap() as usize);
    assert!(fs::read_to_string(out.join("path.csv"))
        .unwrap()
        .starts_with("x,y,z\n2.5,2.5,2.5\n"));
}

#[test]
fn sealed_scene_exits_stuck() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = gatsbi(&[
        "run",
        "--scene",
        &scene_path("sealed"),
        "--start",
        "3.9,5.5,0.5,-90",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "stuck");
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.scene");
    assert_eq!(
        gatsbi(&["run", "--scene", missing.to_str().unwrap(), "--start", "1,1,1,0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(gatsbi(&["run", "--start", "1,1,1,0"]).status.code(), Some(1));
    assert_eq!(gatsbi(&["frobnicate"]).status.code(), Some(1));
    let scene = write(dir.path(), "lone.scene", LONE);
    assert_eq!(
        gatsbi(&["run", "--scene", &scene, "--start", "1,1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        gatsbi(&["oracle", "--scene", &scene, "--granularity", "diagonal"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(gatsbi(&["--help"]).status.code(), Some(0));
}

#[test]
fn gtsp_triangle_and_errors() {
    let dir = TempDir::new().unwrap();
    let tri = write(
        dir.path(),
        "tri.gtsp",
        &dump(&[[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [3.0, 4.0, 0.0]]),
    );
    let o = gatsbi(&["gtsp", &tri]);
    assert_eq!(o.status.code(), Some(0));
    assert!((cost(&o) - 12.0).abs() < 1e-9);
    let o = gatsbi(&["gtsp", &tri, "--exact"]);
    assert!((cost(&o) - 12.0).abs() < 1e-9);

    let junk = write(dir.path(), "junk.gtsp", "DIMENSION : two\n");
    assert_eq!(gatsbi(&["gtsp", &junk]).status.code(), Some(1));

    // twelve singletons put (N-1)! over the exact solver's guard
    let ring: Vec<[f64; 3]> = (0..12).map(|i| [i as f64, (i * i % 7) as f64, 0.0]).collect();
    let big = write(dir.path(), "big.gtsp", &dump(&ring));
    assert_eq!(gatsbi(&["gtsp", &big, "--exact"]).status.code(), Some(3));
    assert_eq!(gatsbi(&["gtsp", &big]).status.code(), Some(0));
}

#[test]
fn exact_never_loses_to_the_heuristic() {
    let dir = TempDir::new().unwrap();
    let pts: Vec<[f64; 3]> = (0..7)
        .map(|i| [(i * 5 % 7) as f64, (i * 3 % 5) as f64, i as f64])
        .collect();
    let p = write(dir.path(), "p.gtsp", &dump(&pts));
    let exact = cost(&gatsbi(&["gtsp", &p, "--exact"]));
    for seed in ["0", "1", "2"] {
        assert!(exact <= cost(&gatsbi(&["gtsp", &p, "--seed", seed])) + 1e-9);
    }
}

#[test]
fn oracle_counts() {
    let dir = TempDir::new().unwrap();
    let lone = write(dir.path(), "lone.scene", LONE);
    let o = gatsbi(&["oracle", "--scene", &lone]);
    assert_eq!(stdout(&o), "inspectable 1\nuninspectable 0\n");

    let mut boxed = String::from("res 1\ndims 9 9 9\n4 4 4 I\n");
    for (i, j, k) in [(3, 4, 4), (5, 4, 4), (4, 3, 4), (4, 5, 4), (4, 4, 3), (4, 4, 5)] {
        boxed.push_str(&format!("{i} {j} {k} O\n"));
    }
    let boxed = write(dir.path(), "boxed.scene", &boxed);
    let o = gatsbi(&["oracle", "--scene", &boxed, "--cameras", "fwd,up,down"]);
    assert_eq!(stdout(&o), "inspectable 0\nuninspectable 1\n");
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let lone = write(dir.path(), "lone.scene", LONE);
    let conf = write(
        dir.path(),
        "run.conf",
        &format!("scene = {lone}\nstart = 2.5,2.5,2.5,45\n[view]\napex_deg = 20 # degrees\n[planner]\nseed = 4\n"),
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        gatsbi(&["run", "--config", &conf, "--out", a.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        gatsbi(&[
            "run",
            "--config",
            &conf,
            "--cruise-mps",
            "2",
            "--out",
            b.to_str().unwrap()
        ])
        .status
        .code(),
        Some(0)
    );
    let ra: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    let rb: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("report.json")).unwrap()).unwrap();
    assert_eq!(ra["cruise_mps"], 1.0);
    assert_eq!(rb["cruise_mps"], 2.0);

    let bad = write(
        dir.path(),
        "bad.conf",
        &format!("scene = {lone}\nstart = 2.5,2.5,2.5,45\ncolour = blue\n"),
    );
    assert_eq!(
        gatsbi(&["run", "--config", &bad, "--out", a.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}
