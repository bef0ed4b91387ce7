//! End-to-end runs: load the rig and manifests, match frames, then label and
//! denoise every frame bundle and write the results.
//!
//! Outputs under `out/`:
//! - `labeled/frame_<id>.pcd`: binary PCD with `label` and `cluster` columns
//! - `report.csv`: one row per frame, in frame order
//! - `summary.json`: sequence summary and per-frame timings
//!
//! Frames are processed by a fixed-size worker pool. Results are collected
//! in manifest order before anything is written, so the labeled clouds and
//! the CSV do not depend on the worker count. `summary.json` holds wall times
//! and differs between runs.

mod stats;

pub use stats::{format_comparison, format_stats};

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{load_rig, CalibError, CameraModel};
use crate::cloud::{
    load_manifest, match_frames, read_pcd, write_pcd, FrameBundle, ManifestError, PcdEncoding,
    PcdError, PointCloudFrame, DEFAULT_MATCH_TOLERANCE,
};
use crate::detect::{
    clip_to_image, filter_confidence, filter_oversized, load_detections, restrict_classes,
    DetectError,
};
use crate::fusion::{label_frame, CameraDetections, DistortionMode, FusionError, LabeledCloud};
use crate::segment::{
    aggregate_reports, denoise_frame, write_report_csv, FrameReport, KMeansConfig, KMeansError,
    ReportError, SequenceSummary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Rig calibration (JSON).
    pub calib: PathBuf,
    /// Manifest with the `lidar` stream.
    pub clouds: PathBuf,
    /// Manifest with the `cam<N>` detection streams.
    pub dets: PathBuf,
    pub out: PathBuf,
    /// Largest accepted time offset between a cloud and a detection set (s).
    pub tolerance: f64,
    pub min_confidence: f64,
    /// Class ids to keep; empty keeps every class.
    pub classes: BTreeSet<u8>,
    pub kmeans: KMeansConfig,
    pub distortion: DistortionMode,
    pub denoise: bool,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            calib: PathBuf::new(),
            clouds: PathBuf::new(),
            dets: PathBuf::new(),
            out: PathBuf::new(),
            tolerance: DEFAULT_MATCH_TOLERANCE,
            min_confidence: 0.0,
            classes: BTreeSet::new(),
            kmeans: KMeansConfig::default(),
            distortion: DistortionMode::Off,
            denoise: true,
            workers: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        for (name, p) in [("calib", &self.calib), ("clouds", &self.clouds), ("dets", &self.dets), ("out", &self.out)] {
            if p.as_os_str().is_empty() {
                return bad(format!("{name} path is empty"));
            }
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1".into());
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return bad(format!("matching tolerance {} must be a non-negative number", self.tolerance));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return bad(format!("confidence threshold {} outside [0, 1]", self.min_confidence));
        }
        self.kmeans
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn labeled_path(&self, frame_id: u64) -> PathBuf {
        self.out.join("labeled").join(format!("frame_{frame_id:06}.pcd"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.out.join("report.csv")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out.join("summary.json")
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("calibration {path}: {source}")]
    Calib {
        path: String,
        #[source]
        source: CalibError,
    },
    #[error("manifest {path}: {source}")]
    Manifest {
        path: String,
        #[source]
        source: ManifestError,
    },
    #[error("manifest {path} has no lidar stream")]
    NoLidar { path: String },
    #[error("manifest {path} lists lidar frame {frame} twice")]
    DuplicateFrame { path: String, frame: u64 },
    #[error("manifest {path} references camera {camera}, which is not in the rig")]
    UnknownCamera { path: String, camera: u32 },
    #[error("frame {frame}: cloud {path}: {source}")]
    Cloud {
        frame: u64,
        path: String,
        #[source]
        source: PcdError,
    },
    #[error("frame {frame}: detections {path}: {source}")]
    Detections {
        frame: u64,
        path: String,
        #[source]
        source: DetectError,
    },
    #[error("frame {frame}: {source}")]
    Fusion {
        frame: u64,
        #[source]
        source: FusionError,
    },
    #[error("frame {frame}: {source}")]
    KMeans {
        frame: u64,
        #[source]
        source: KMeansError,
    },
    #[error("frame {frame}: cannot write {path}: {source}")]
    Output {
        frame: u64,
        path: String,
        #[source]
        source: PcdError,
    },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Bookkeeping for one processed frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameStats {
    pub frame_id: u64,
    /// Cameras with a detection set inside the matching window.
    pub cameras_matched: usize,
    /// Detections used for labeling, after all filters.
    pub detections: usize,
    /// Records rejected while parsing the detection files.
    pub rejected_records: usize,
    /// Detections dropped by the confidence and class filters or clipped away.
    pub filtered: usize,
    /// Detections dropped for covering more than a quarter of the image.
    pub oversized: usize,
    /// Points dropped from the cloud file for a non-finite coordinate.
    pub nonfinite_points: usize,
    /// Wall time from reading the cloud to the finished labels (s).
    pub seconds: f64,
}

/// Everything produced for one frame.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame: PointCloudFrame,
    pub labels: LabeledCloud,
    pub report: FrameReport,
    pub stats: FrameStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingSummary {
    pub total_seconds: f64,
    pub max_frame_seconds: f64,
    pub mean_frame_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub frames: usize,
    pub sequence: SequenceSummary,
    pub timing: TimingSummary,
    pub frame_stats: Vec<FrameStats>,
}

/// Apply the configured detection filters for one camera, in order:
/// confidence, class allow-list, clip to the image, oversized boxes.
/// Returns the kept detections, the count removed by the first three
/// filters and the count removed as oversized.
pub fn filter_detections(
    dets: Vec<crate::detect::Detection>,
    cam: &CameraModel,
    cfg: &PipelineConfig,
) -> (Vec<crate::detect::Detection>, usize, usize) {
    let n = dets.len();
    let dets = filter_confidence(dets, cfg.min_confidence);
    let dets = restrict_classes(dets, &cfg.classes);
    let dets = clip_to_image(dets, cam);
    let filtered = n - dets.len();
    let (kept, oversized) = filter_oversized(dets, cam);
    (kept, filtered, oversized.len())
}

/// Label, and unless disabled denoise, one frame held in memory.
pub fn process_frame(
    frame: &PointCloudFrame,
    rig: &[CameraModel],
    detections: &CameraDetections,
    cfg: &PipelineConfig,
) -> Result<(LabeledCloud, FrameReport), PipelineError> {
    let fid = frame.frame_id;
    let lc = label_frame(frame, rig, detections, cfg.distortion)
        .map_err(|source| PipelineError::Fusion { frame: fid, source })?;
    if cfg.denoise {
        denoise_frame(frame, &lc, &cfg.kmeans).map_err(|source| PipelineError::KMeans { frame: fid, source })
    } else {
        let report = FrameReport::without_denoise(frame.len(), &lc);
        Ok((lc, report))
    }
}

fn process_bundle(
    bundle: &FrameBundle,
    rig: &BTreeMap<u32, CameraModel>,
    rig_list: &[CameraModel],
    cfg: &PipelineConfig,
) -> Result<FrameResult, PipelineError> {
    let start = Instant::now();
    let frame_id = bundle.cloud.frame_id;
    let pcd = read_pcd(&bundle.cloud.path).map_err(|source| PipelineError::Cloud {
        frame: frame_id,
        path: bundle.cloud.path.display().to_string(),
        source,
    })?;
    let mut frame = pcd.frame;
    frame.frame_id = frame_id;
    frame.timestamp = bundle.cloud.timestamp;

    let mut stats = FrameStats {
        frame_id,
        cameras_matched: bundle.cameras.len(),
        detections: 0,
        rejected_records: 0,
        filtered: 0,
        oversized: 0,
        nonfinite_points: pcd.rejected,
        seconds: 0.0,
    };
    let mut detections = CameraDetections::new();
    for (&cam_id, m) in &bundle.cameras {
        let cam = &rig[&cam_id];
        let set = load_detections(&m.path).map_err(|source| PipelineError::Detections {
            frame: frame_id,
            path: m.path.display().to_string(),
            source,
        })?;
        stats.rejected_records += set.rejected.len();
        let own: Vec<_> = set
            .detections
            .into_iter()
            .filter(|d| d.camera_id == cam_id && d.frame_id == m.frame_id)
            .collect();
        let (kept, filtered, oversized) = filter_detections(own, cam, cfg);
        stats.filtered += filtered;
        stats.oversized += oversized;
        stats.detections += kept.len();
        detections.insert(cam_id, kept);
    }

    let (labels, report) = process_frame(&frame, rig_list, &detections, cfg)?;
    stats.seconds = start.elapsed().as_secs_f64();
    Ok(FrameResult {
        frame,
        labels,
        report,
        stats,
    })
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(Vec<CameraModel>, Vec<FrameBundle>), PipelineError> {
    let rig = load_rig(&cfg.calib).map_err(|source| PipelineError::Calib {
        path: cfg.calib.display().to_string(),
        source,
    })?;
    let manifest = |p: &Path| {
        load_manifest(p).map_err(|source| PipelineError::Manifest {
            path: p.display().to_string(),
            source,
        })
    };
    let clouds = manifest(&cfg.clouds)?;
    let dets = manifest(&cfg.dets)?;
    let lidar = clouds.lidar().ok_or_else(|| PipelineError::NoLidar {
        path: cfg.clouds.display().to_string(),
    })?;
    let mut seen = BTreeSet::new();
    for e in lidar.entries() {
        if !seen.insert(e.frame_id) {
            return Err(PipelineError::DuplicateFrame {
                path: cfg.clouds.display().to_string(),
                frame: e.frame_id,
            });
        }
    }
    let cameras = dets.cameras();
    if let Some(&camera) = cameras.keys().find(|id| !rig.iter().any(|c| c.id == **id)) {
        return Err(PipelineError::UnknownCamera {
            path: cfg.dets.display().to_string(),
            camera,
        });
    }
    let bundles = match_frames(lidar, &cameras, cfg.tolerance);
    Ok((rig, bundles))
}

/// Run the whole pipeline and write its outputs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let start = Instant::now();
    cfg.validate()?;
    let (rig_list, bundles) = load_inputs(cfg)?;
    let rig: BTreeMap<u32, CameraModel> = rig_list.iter().map(|c| (c.id, *c)).collect();

    let labeled_dir = cfg.out.join("labeled");
    std::fs::create_dir_all(&labeled_dir).map_err(|source| PipelineError::Io {
        path: labeled_dir.display().to_string(),
        source,
    })?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let mut reports = Vec::with_capacity(bundles.len());
    let mut frame_stats = Vec::with_capacity(bundles.len());
    // A chunk is the reorder window: its frames run concurrently and are
    // written back in manifest order.
    for chunk in bundles.chunks(cfg.workers * 2) {
        let results: Vec<Result<FrameResult, PipelineError>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|b| process_bundle(b, &rig, &rig_list, cfg))
                .collect()
        });
        for r in results {
            let r = r?;
            let path = cfg.labeled_path(r.stats.frame_id);
            write_pcd(&r.frame, Some(&r.labels), &path, PcdEncoding::Binary).map_err(|source| {
                PipelineError::Output {
                    frame: r.stats.frame_id,
                    path: path.display().to_string(),
                    source,
                }
            })?;
            reports.push(r.report);
            frame_stats.push(r.stats);
        }
    }
    write_report_csv(cfg.report_path(), &reports)?;

    let secs: Vec<f64> = frame_stats.iter().map(|s| s.seconds).collect();
    let summary = RunSummary {
        frames: reports.len(),
        sequence: aggregate_reports(&reports),
        timing: TimingSummary {
            total_seconds: start.elapsed().as_secs_f64(),
            max_frame_seconds: secs.iter().copied().fold(0.0, f64::max),
            mean_frame_seconds: if secs.is_empty() { 0.0 } else { secs.iter().sum::<f64>() / secs.len() as f64 },
        },
        frame_stats,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let path = cfg.summary_path();
    std::fs::write(&path, json).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PipelineConfig {
        PipelineConfig {
            calib: "c.json".into(),
            clouds: "c.manifest".into(),
            dets: "d.manifest".into(),
            out: "out".into(),
            ..Default::default()
        }
    }

    #[test]
    fn config_invariants() {
        cfg().validate().unwrap();
        assert!(PipelineConfig { workers: 0, ..cfg() }.validate().is_err());
        assert!(PipelineConfig { out: PathBuf::new(), ..cfg() }.validate().is_err());
        assert!(PipelineConfig { min_confidence: 1.5, ..cfg() }.validate().is_err());
        assert!(PipelineConfig { tolerance: f64::NAN, ..cfg() }.validate().is_err());
        let mut c = cfg();
        c.kmeans.k = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_file_fields_are_optional() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"calib": "a", "kmeans": {"k": 4}, "distortion": "on"}"#).unwrap();
        assert_eq!(c.kmeans.k, 4);
        assert_eq!(c.kmeans.max_iter, 100);
        assert_eq!(c.distortion, DistortionMode::On);
        assert_eq!(c.workers, 1);
        assert!(c.denoise);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
