use std::path::Path;

use lidar_label::calib::load_rig;
use lidar_label::cloud::read_pcd;
use lidar_label::detect::BBox;
use lidar_label::pipeline::{format_comparison, format_stats, run_pipeline, PipelineConfig, PipelineError};
use lidar_label::scene::{default_rig, gen_scene, read_truth, SceneSpec, ScenePaths};
use lidar_label::segment::{read_report_csv, KMeansConfig};
use nalgebra::Vector3;

fn scene(dir: &Path, spec: &SceneSpec) -> (ScenePaths, PipelineConfig) {
    let paths = gen_scene(spec, &default_rig(), dir).unwrap();
    let cfg = PipelineConfig {
        calib: paths.calib.clone(),
        clouds: paths.clouds.clone(),
        dets: paths.dets.clone(),
        out: dir.join("out"),
        ..Default::default()
    };
    (paths, cfg)
}

fn small_spec() -> SceneSpec {
    SceneSpec {
        frames: 3,
        objects: 3,
        points_per_object: 600,
        background_points: 4000,
        seed: 42,
        ..Default::default()
    }
}

#[test]
fn empty_detection_manifest_leaves_frames_unlabeled() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut cfg) = scene(dir.path(), &small_spec());
    let empty = dir.path().join("empty.manifest");
    std::fs::write(&empty, "# no detections\n").unwrap();
    cfg.dets = empty;
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.frames, 3);
    assert_eq!(summary.sequence.empty_frames, vec![0, 1, 2]);
    assert_eq!(summary.sequence.mean, None);
    for r in read_report_csv(cfg.report_path()).unwrap() {
        assert_eq!(r.labeled_before, 0);
        assert_eq!(r.drop_rate_percent, 0.0);
    }
    let out = read_pcd(cfg.labeled_path(1)).unwrap();
    assert!(out.labels.unwrap().iter().all(|&l| l == -1));
}

#[test]
fn denoise_does_not_change_labeled_before() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = scene(dir.path(), &small_spec());
    let off = PipelineConfig {
        denoise: false,
        out: dir.path().join("off"),
        ..cfg.clone()
    };
    run_pipeline(&cfg).unwrap();
    run_pipeline(&off).unwrap();
    let with = read_report_csv(cfg.report_path()).unwrap();
    let without = read_report_csv(off.report_path()).unwrap();
    assert_eq!(with.len(), without.len());
    for (a, b) in with.iter().zip(&without) {
        assert_eq!(a.labeled_before, b.labeled_before);
        assert_eq!(b.kept_after, b.labeled_before);
        assert!(a.kept_after < a.labeled_before);
    }
    let text = format_comparison(&without, &with);
    assert_eq!(text.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 3);
}

fn floats(v: &serde_json::Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn kept_points_center_on_planted_objects() {
    let dir = tempfile::tempdir().unwrap();
    let (paths, cfg) = scene(dir.path(), &small_spec());
    run_pipeline(&cfg).unwrap();
    let rig = load_rig(&paths.calib).unwrap();
    let objects: serde_json::Value = serde_json::from_slice(&std::fs::read(&paths.objects).unwrap()).unwrap();
    let objects = objects.as_array().unwrap();
    assert_eq!(objects.len(), 9);
    for o in objects {
        let frame = o["frame_id"].as_u64().unwrap();
        let id = o["id"].as_i64().unwrap() as i32;
        let cam = rig.iter().find(|c| c.id as u64 == o["camera_id"].as_u64().unwrap()).unwrap();
        let b = floats(&o["bbox"]);
        let bbox = BBox::new(b[0], b[1], b[2], b[3]);
        let c = floats(&o["center"]);
        let center = Vector3::new(c[0], c[1], c[2]);
        let axes = floats(&o["semi_axes"]);
        let yaw = o["yaw"].as_f64().unwrap();

        let truth = read_truth(paths.truth(frame)).unwrap();
        let out = read_pcd(cfg.labeled_path(frame)).unwrap();
        let clusters = out.clusters.unwrap();
        let mut kept = Vec::new();
        for ((p, &cl), &t) in out.frame.points.iter().zip(&clusters).zip(&truth) {
            if t == id {
                assert!(cl >= 0, "frame {frame}: point of object {id} dropped");
            }
            if cl >= 0 && cam.project(&p.position(), false).is_some_and(|(u, v)| bbox.contains(u, v)) {
                kept.push(p.position());
            }
        }
        // Coordinate-wise median: noise that joined the kept cluster shifts a
        // mean along the viewing ray but not the median of an object-majority set.
        let median = |axis: usize| {
            let mut v: Vec<f64> = kept.iter().map(|p| p[axis]).collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        // Offset in the object's own frame, scaled by its semi-axes.
        let d = Vector3::new(median(0), median(1), median(2)) - center;
        let (s, co) = yaw.sin_cos();
        let local = Vector3::new(co * d.x + s * d.y, -s * d.x + co * d.y, d.z);
        let r = Vector3::new(local.x / axes[0], local.y / axes[1], local.z / axes[2]).norm();
        assert!(r < 1.0, "frame {frame} object {id}: kept median {r:.2} semi-axes from center");
    }
}

/// With no noise every in-box point belongs to the object. Keeping only the
/// largest cluster then keeps everything only for k = 1; at the default k = 3
/// Lloyd cuts the blob into three parts and the largest is kept.
#[test]
fn single_clean_object() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec {
        frames: 2,
        objects: 1,
        noise_fraction: 0.0,
        points_per_object: 1000,
        background_points: 3000,
        seed: 3,
        ..Default::default()
    };
    let (paths, cfg) = scene(dir.path(), &spec);
    let k1 = PipelineConfig {
        out: dir.path().join("k1"),
        kmeans: KMeansConfig { k: 1, ..cfg.kmeans },
        ..cfg.clone()
    };
    run_pipeline(&cfg).unwrap();
    run_pipeline(&k1).unwrap();
    for f in 0..2 {
        let truth = read_truth(paths.truth(f)).unwrap();
        let kept = |cfg: &PipelineConfig| {
            let out = read_pcd(cfg.labeled_path(f)).unwrap();
            let labels = out.labels.unwrap();
            let in_box: Vec<usize> = (0..truth.len()).filter(|&i| labels[i] >= 0).collect();
            assert!(in_box.iter().all(|&i| truth[i] == 0));
            let clusters = out.clusters.unwrap();
            let kept = in_box.iter().filter(|&&i| clusters[i] >= 0).count();
            kept as f64 / in_box.len() as f64
        };
        assert!(kept(&k1) >= 0.99);
        let k3 = kept(&cfg);
        assert!((1.0 / 3.0..0.6).contains(&k3), "k = 3 kept {k3}");
    }
}

#[test]
fn no_objects_no_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = scene(dir.path(), &SceneSpec { objects: 0, ..small_spec() });
    let summary = run_pipeline(&cfg).unwrap();
    assert!(summary.sequence.frames.iter().all(|f| f.labeled_before == 0));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = scene(dir.path(), &small_spec());
    run_pipeline(&cfg).unwrap();
    let first = (std::fs::read(cfg.report_path()).unwrap(), std::fs::read(cfg.labeled_path(2)).unwrap());
    run_pipeline(&cfg).unwrap();
    let second = (std::fs::read(cfg.report_path()).unwrap(), std::fs::read(cfg.labeled_path(2)).unwrap());
    assert_eq!(first, second);
}

#[test]
fn stats_summarize_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = scene(dir.path(), &small_spec());
    let summary = run_pipeline(&cfg).unwrap();
    let reports = read_report_csv(cfg.report_path()).unwrap();
    let text = format_stats(&reports);
    let mean = summary.sequence.mean.unwrap();
    assert!(text.contains(&format!("mean drop rate: {mean:.2}%")), "{text}");
    assert!(summary.timing.max_frame_seconds >= summary.timing.mean_frame_seconds);
    assert_eq!(summary.frame_stats.len(), 3);
    assert!(cfg.summary_path().exists());
}

#[test]
fn unknown_camera_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut cfg) = scene(dir.path(), &small_spec());
    let dets = dir.path().join("bad.manifest");
    std::fs::write(&dets, "cam9 0 0.0 dets/cam0_000000.txt\n").unwrap();
    cfg.dets = dets;
    match run_pipeline(&cfg) {
        Err(e @ PipelineError::UnknownCamera { camera: 9, .. }) => assert!(e.to_string().contains("camera 9")),
        other => panic!("expected unknown camera error, got {other:?}"),
    }
}

#[test]
fn missing_cloud_names_the_frame() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = scene(dir.path(), &small_spec());
    std::fs::remove_file(dir.path().join("clouds/frame_000001.pcd")).unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Cloud { frame: 1, .. }), "{err}");
    assert!(err.to_string().contains("frame_000001.pcd"));
}

#[test]
fn malformed_detection_file_names_the_frame() {
    let dir = tempfile::tempdir().unwrap();
    let (_, cfg) = scene(dir.path(), &small_spec());
    std::fs::write(dir.path().join("dets/cam2_000002.txt"), "2 2 car\n").unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Detections { frame: 2, .. }), "{err}");
}

#[test]
fn class_allow_list_restricts_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mut cfg) = scene(dir.path(), &small_spec());
    // Objects cycle car (2), person (0), truck (7).
    cfg.classes = [0u8].into_iter().collect();
    run_pipeline(&cfg).unwrap();
    for r in read_report_csv(cfg.report_path()).unwrap() {
        assert!(r.labeled_before > 0);
        assert!(r.per_class.keys().all(|&c| c == 0));
    }
}
