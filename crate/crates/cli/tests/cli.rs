use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn twinmaser(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinmaser"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("TWINMASER_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = twinmaser(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn route_one_reports_the_pitchfork() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("r1");
    ok(&["route", "1"], &dir);
    let line = read(&dir, "events.jsonl");
    let ev: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(ev["kind"], "Pitchfork");
    let loc = ev["location"].as_f64().unwrap();
    assert!((loc - 1.25).abs() <= 0.005, "{loc}");
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir, "manifest.json")).unwrap();
    assert_eq!(manifest["config"]["command"]["name"], "route");
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(manifest["versions"]["twinmaser"].is_string());
}

#[test]
fn no_signal_boundary_below_two_is_the_pitchfork_line() {
    let tmp = TempDir::new().unwrap();
    ok(&["boundaries"], tmp.path());
    let ns = rows(&read(tmp.path(), "ns_boundary.csv"));
    assert_eq!(ns.len(), 401);
    for r in &ns {
        let expect = if r[0] < 2.0 {
            1.0 + (r[0] / 2.0).powi(2)
        } else {
            2.0
        };
        assert!((r[1] - expect).abs() <= 1e-15 * expect, "{r:?}");
    }
    let tfp = rows(&read(tmp.path(), "tfp_boundary.csv"));
    assert!(!tfp.is_empty());
    for r in &tfp {
        let y = (r[0] / 2.0).powi(2);
        let d = 13.65 * (0.03 + 1.0 / 21.5);
        let expect = 1.5 * y + (1.0 - d) / (2.0 * (y - d));
        assert!((r[1] - expect).abs() <= 1e-9 * expect.abs());
        assert!(r[1] <= 12.0);
    }
}

#[test]
fn numbers_are_written_with_seventeen_significant_digits() {
    let tmp = TempDir::new().unwrap();
    ok(
        &["simulate", "--t-end", "50", "--samples", "11"],
        tmp.path(),
    );
    let csv = read(tmp.path(), "trajectory.csv");
    assert_eq!(csv.lines().next(), Some("t,A,B,Pz"));
    for field in csv.lines().skip(1).flat_map(|l| l.split(',')) {
        let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");
    }
}

#[test]
fn small_diagram_is_bit_identical_across_runs_and_workers() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "diagram",
        "--grid",
        "4x3",
        "--subsamples",
        "1",
        "--random-seeds",
        "1",
    ];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&args, &a);
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "2"]);
    ok(&with_workers, &b);
    for f in ["diagram.csv", "boundaries.json"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    assert_eq!(read(&a, "diagram.csv").lines().count(), 13);
}

#[test]
fn manifest_replays_to_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    ok(
        &[
            "simulate",
            "--alpha-ratio",
            "2.3",
            "--eps-t2",
            "2.4",
            "--t-end",
            "300",
            "--full",
        ],
        &first,
    );
    let again = tmp.path().join("again");
    let manifest = first.join("manifest.json");
    ok(&["run", "--config", manifest.to_str().unwrap()], &again);
    assert_eq!(
        read(&first, "trajectory.csv"),
        read(&again, "trajectory.csv")
    );
    assert!(read(&first, "trajectory.csv").starts_with("t,P1x,P1y,P1z,P2x,P2y,P2z\n"));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"params":{"alpha_ratio":3.0,"eps_t2":0.0},"command":{"name":"perturb","points":11}}"#,
    )
    .unwrap();
    let dir = tmp.path().join("out");
    ok(
        &[
            "perturb",
            "--config",
            cfg.to_str().unwrap(),
            "--eps-t2",
            "2.5",
        ],
        &dir,
    );
    let m: serde_json::Value = serde_json::from_str(&read(&dir, "manifest.json")).unwrap();
    assert_eq!(m["config"]["params"]["eps_t2"], 2.5);
    assert_eq!(m["config"]["params"]["alpha_ratio"], 3.0);
    assert_eq!(m["config"]["command"]["points"], 11);
    let k = m["summary"]["k"].as_f64().unwrap();
    assert!((k - 0.61442).abs() < 5e-5);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let code = |args: &[&str]| twinmaser(args, &tmp.path().join("x")).status.code();
    assert_eq!(code(&["route", "7"]), Some(2));
    assert_eq!(code(&["simulate", "--t-end", "-1"]), Some(2));
    assert_eq!(code(&["perturb", "--eps-t2", "1.5"]), Some(2));
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"params":{"alpha":1}}"#).unwrap();
    assert_eq!(
        code(&["fixed-points", "--config", bad.to_str().unwrap()]),
        Some(2)
    );
    // No collapse inside the window: the detector cannot conclude.
    assert_eq!(code(&["route", "2", "--range", "2.1,2.3"]), Some(3));
}

#[test]
fn worker_count_comes_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_twinmaser"))
        .args(["fixed-points", "--out"])
        .arg(tmp.path())
        .env("TWINMASER_WORKERS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_str(&read(tmp.path(), "manifest.json")).unwrap();
    assert_eq!(m["workers"], 3);
}

#[test]
fn correspondence_report() {
    let tmp = TempDir::new().unwrap();
    ok(&["correspond", "--alpha-ratio", "2.2"], tmp.path());
    let r: serde_json::Value = serde_json::from_str(&read(tmp.path(), "correspond.json")).unwrap();
    assert!(r["residual_max"].as_f64().unwrap() <= 1e-7);
    assert_eq!(r["winding"]["commensurate"], false);
    let csv = read(tmp.path(), "full_trajectory.csv");
    assert_eq!(csv.lines().count(), 1001);
}
