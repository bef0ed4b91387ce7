//! Detection-guided labeling: every LIDAR point is projected into every
//! camera, and points whose pixel falls inside a detection box take that
//! detection's class.
//!
//! When a point lands in several boxes (overlapping boxes, or overlapping
//! camera fields of view) the smallest box wins; equal areas go to the lower
//! camera id, then the lower detection index.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::CameraModel;
use crate::cloud::PointCloudFrame;
use crate::detect::{BBox, Detection};

/// Detections of one frame, grouped by camera id. The position of a
/// detection in its camera's list is its index in [`DetectionRef`].
pub type CameraDetections = BTreeMap<u32, Vec<Detection>>;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("detections reference camera {0}, which is not in the rig")]
    UnknownCamera(u32),
}

/// Whether projection applies lens distortion before the box test. Boxes on
/// undistorted images need `Off`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistortionMode {
    #[default]
    Off,
    On,
}

impl std::str::FromStr for DistortionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(Self::Off),
            "on" => Ok(Self::On),
            _ => Err(format!("distortion mode must be on or off, not {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DetectionRef {
    pub camera_id: u32,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub class_id: u8,
    pub detection: DetectionRef,
    /// Set once the detection's points have been clustered.
    pub cluster_id: Option<u32>,
    /// False when denoising dropped the point.
    pub kept: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointLabel {
    #[default]
    Unlabeled,
    Labeled(Assignment),
}

impl PointLabel {
    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            PointLabel::Labeled(a) => Some(a),
            PointLabel::Unlabeled => None,
        }
    }

    pub fn is_labeled(&self) -> bool {
        matches!(self, PointLabel::Labeled(_))
    }

    pub fn is_kept(&self) -> bool {
        self.assignment().is_some_and(|a| a.kept)
    }

    /// Class id for serialization, -1 when unlabeled.
    pub fn class_column(&self) -> i32 {
        self.assignment().map_or(-1, |a| a.class_id as i32)
    }

    /// Cluster id for serialization, -1 when unclustered or dropped.
    pub fn cluster_column(&self) -> i32 {
        match self.assignment() {
            Some(Assignment {
                cluster_id: Some(c),
                kept: true,
                ..
            }) => *c as i32,
            _ => -1,
        }
    }
}

/// One label per point of a frame, in point order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCloud {
    pub frame_id: u64,
    pub labels: Vec<PointLabel>,
}

impl LabeledCloud {
    pub fn unlabeled(frame: &PointCloudFrame) -> Self {
        Self {
            frame_id: frame.frame_id,
            labels: vec![PointLabel::Unlabeled; frame.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_labeled()).count()
    }

    pub fn kept_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_kept()).count()
    }

    /// Detections that claimed at least one point, in (camera, index) order.
    pub fn detection_refs(&self) -> BTreeSet<DetectionRef> {
        self.labels
            .iter()
            .filter_map(|l| l.assignment().map(|a| a.detection))
            .collect()
    }

    /// Indices of the points assigned to `det`.
    pub fn points_of(&self, det: DetectionRef) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.assignment().is_some_and(|a| a.detection == det))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Half-open box membership.
#[inline]
pub fn point_in_box(u: f64, v: f64, bbox: &BBox) -> bool {
    bbox.contains(u, v)
}

/// Label every point of `frame` from the detections of each camera.
pub fn label_frame(
    frame: &PointCloudFrame,
    rig: &[CameraModel],
    detections: &CameraDetections,
    mode: DistortionMode,
) -> Result<LabeledCloud, FusionError> {
    struct Candidate<'a> {
        cam: &'a CameraModel,
        boxes: Vec<(usize, BBox, f64, u8)>,
    }
    let mut cameras = Vec::new();
    for (&camera_id, dets) in detections {
        let cam = rig
            .iter()
            .find(|c| c.id == camera_id)
            .ok_or(FusionError::UnknownCamera(camera_id))?;
        if dets.is_empty() {
            continue;
        }
        cameras.push(Candidate {
            cam,
            boxes: dets
                .iter()
                .enumerate()
                .map(|(i, d)| (i, d.bbox, d.bbox.area(), d.class_id))
                .collect(),
        });
    }

    let use_distortion = mode == DistortionMode::On;
    let labels = frame
        .points
        .iter()
        .map(|p| {
            let pos = p.position();
            // (area, camera id, index, class); cameras and boxes are visited
            // in ascending order so a strict comparison on area keeps the
            // tie-break order.
            let mut best: Option<(f64, u32, usize, u8)> = None;
            for c in &cameras {
                let Some((u, v)) = c.cam.project(&pos, use_distortion) else {
                    continue;
                };
                if !c.cam.intrinsics.contains(u, v) {
                    continue;
                }
                for &(i, ref bbox, area, class_id) in &c.boxes {
                    if point_in_box(u, v, bbox) && best.is_none_or(|b| area < b.0) {
                        best = Some((area, c.cam.id, i, class_id));
                    }
                }
            }
            match best {
                Some((_, camera_id, index, class_id)) => PointLabel::Labeled(Assignment {
                    class_id,
                    detection: DetectionRef { camera_id, index },
                    cluster_id: None,
                    kept: true,
                }),
                None => PointLabel::Unlabeled,
            }
        })
        .collect();

    Ok(LabeledCloud {
        frame_id: frame.frame_id,
        labels,
    })
}

/// Labeled points per class, dropped points included.
pub fn class_point_counts(lc: &LabeledCloud) -> BTreeMap<u8, usize> {
    count_classes(lc.labels.iter().filter_map(PointLabel::assignment))
}

/// Points per class that survived denoising.
pub fn kept_class_counts(lc: &LabeledCloud) -> BTreeMap<u8, usize> {
    count_classes(lc.labels.iter().filter_map(PointLabel::assignment).filter(|a| a.kept))
}

fn count_classes<'a>(it: impl Iterator<Item = &'a Assignment>) -> BTreeMap<u8, usize> {
    let mut counts = BTreeMap::new();
    for a in it {
        *counts.entry(a.class_id).or_insert(0) += 1;
    }
    counts
}
