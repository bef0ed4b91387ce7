use std::path::Path;
use std::process::{Command, Output};

fn lidar_label(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lidar-label"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lidar_label(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_run_stats_compare() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    ok(&["gen-scene", "--out", s(&scene), "--frames", "3", "--points-per-object", "500", "--background", "3000", "--seed", "5"]);

    let calib = scene.join("calib.json");
    let clouds = scene.join("clouds.manifest");
    let dets = scene.join("dets.manifest");
    let with = dir.path().join("with");
    let without = dir.path().join("without");
    let common = ["--calib", s(&calib), "--clouds", s(&clouds), "--dets", s(&dets)];

    let text = ok(&[&["run"][..], &common, &["--out", s(&with), "--k", "3", "--seed", "1", "--workers", "2"]].concat());
    assert!(text.contains("mean drop rate"), "{text}");
    assert!(with.join("labeled/frame_000002.pcd").exists());
    ok(&[&["run"][..], &common, &["--out", s(&without), "--no-denoise"]].concat());

    let report = with.join("report.csv");
    let text = ok(&["stats", s(&report)]);
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 3);

    let text = ok(&["stats", "--compare", s(&without.join("report.csv")), s(&report)]);
    assert!(text.contains("d_after"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    ok(&["gen-scene", "--out", s(&scene), "--frames", "2", "--objects", "2", "--points-per-object", "300", "--background", "1000"]);
    let cfg = dir.path().join("run.json");
    let json = serde_json::json!({
        "calib": scene.join("calib.json"),
        "clouds": scene.join("clouds.manifest"),
        "dets": scene.join("dets.manifest"),
        "out": dir.path().join("from-config"),
        "classes": [2],
        "kmeans": {"k": 2}
    });
    std::fs::write(&cfg, json.to_string()).unwrap();
    let out = dir.path().join("from-flag");
    ok(&["run", "--config", s(&cfg), "--out", s(&out), "--classes", "person,car"]);
    assert!(out.join("report.csv").exists());
    assert!(!dir.path().join("from-config").exists());
    let header = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(header.lines().next().unwrap().contains("person_before"));
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = lidar_label(&["run", "--calib", s(&missing), "--clouds", "a", "--dets", "b", "--out", "c"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let out = lidar_label(&["run", "--calib", "a", "--clouds", "b", "--dets", "c", "--out", "d", "--workers", "0"]);
    assert!(!out.status.success());

    let out = lidar_label(&["run", "--calib", "a", "--clouds", "b", "--dets", "c", "--out", "d", "--classes", "dragon"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dragon"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "frame,x\n1,2\n").unwrap();
    assert!(!lidar_label(&["stats", s(&bad)]).status.success());
    assert!(!lidar_label(&["gen-scene", "--out", s(dir.path()), "--noise", "1.0"]).status.success());
}
