//! 2D detection records from an external detector.
//!
//! One record per line, whitespace separated, `#` starts a comment:
//!
//! ```text
//! camera_id frame_id class_id confidence x_min y_min x_max y_max
//! 0 5 2 0.91 100 120 220 260
//! ```
//!
//! Boxes are in undistorted pixel coordinates. Class ids index the standard
//! 80-class COCO list.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::calib::CameraModel;

/// COCO-80 class names, indexed by class id.
pub const COCO_CLASSES: [&str; 80] = [
    "person", "bicycle", "car", "motorbike", "aeroplane", "bus", "train", "truck", "boat",
    "traffic light", "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog",
    "horse", "sheep", "cow", "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella",
    "handbag", "tie", "suitcase", "frisbee", "skis", "snowboard", "sports ball", "kite",
    "baseball bat", "baseball glove", "skateboard", "surfboard", "tennis racket", "bottle",
    "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple", "sandwich", "orange",
    "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "sofa", "pottedplant", "bed",
    "diningtable", "toilet", "tvmonitor", "laptop", "mouse", "remote", "keyboard", "cell phone",
    "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors",
    "teddy bear", "hair drier", "toothbrush",
];

pub fn class_name(class_id: u8) -> Option<&'static str> {
    COCO_CLASSES.get(class_id as usize).copied()
}

/// Class id for a name, accepting spaces or underscores.
pub fn class_id(name: &str) -> Option<u8> {
    let name = name.replace('_', " ");
    COCO_CLASSES.iter().position(|&c| c == name).map(|i| i as u8)
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("cannot read detections {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Axis-aligned box in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        self.check().is_none()
    }

    fn check(&self) -> Option<RejectReason> {
        let all = [self.x_min, self.y_min, self.x_max, self.y_max];
        if !all.iter().all(|v| v.is_finite()) {
            Some(RejectReason::NonFiniteBox)
        } else if self.x_min >= self.x_max {
            Some(RejectReason::EmptyWidth)
        } else if self.y_min >= self.y_max {
            Some(RejectReason::EmptyHeight)
        } else {
            None
        }
    }

    /// Half-open membership: `[x_min, x_max) x [y_min, y_max)`.
    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        self.x_min <= u && u < self.x_max && self.y_min <= v && v < self.y_max
    }

    /// Intersection with `[0, width) x [0, height)`, if non-empty.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        let b = BBox::new(
            self.x_min.max(0.0),
            self.y_min.max(0.0),
            self.x_max.min(width),
            self.y_max.min(height),
        );
        b.is_valid().then_some(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub camera_id: u32,
    pub frame_id: u64,
    pub class_id: u8,
    pub class_name: &'static str,
    pub confidence: f64,
    pub bbox: BBox,
}

impl Detection {
    /// Build a record, checking class id, confidence and box.
    pub fn new(
        camera_id: u32,
        frame_id: u64,
        class_id: u16,
        confidence: f64,
        bbox: BBox,
    ) -> Result<Self, RejectReason> {
        let name = u8::try_from(class_id)
            .ok()
            .and_then(class_name)
            .ok_or(RejectReason::UnknownClass(class_id))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(RejectReason::Confidence(confidence));
        }
        if let Some(reason) = bbox.check() {
            return Err(reason);
        }
        Ok(Self {
            camera_id,
            frame_id,
            class_id: class_id as u8,
            class_name: name,
            confidence,
            bbox,
        })
    }

    /// The record as one line of the detection file format.
    pub fn to_line(&self) -> String {
        let b = &self.bbox;
        format!(
            "{} {} {} {} {} {} {} {}",
            self.camera_id, self.frame_id, self.class_id, self.confidence, b.x_min, b.y_min, b.x_max, b.y_max
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RejectReason {
    UnknownClass(u16),
    Confidence(f64),
    NonFiniteBox,
    EmptyWidth,
    EmptyHeight,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownClass(id) => write!(f, "unknown class {id}"),
            Self::Confidence(c) => write!(f, "confidence {c} outside [0, 1]"),
            Self::NonFiniteBox => f.write_str("non-finite box coordinate"),
            Self::EmptyWidth => f.write_str("x_min >= x_max"),
            Self::EmptyHeight => f.write_str("y_min >= y_max"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub reason: RejectReason,
}

/// Parsed detection file: valid records plus per-record rejections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub detections: Vec<Detection>,
    pub rejected: Vec<Rejection>,
}

/// Parse detection records. Lines that are not well-formed records are
/// errors; well-formed records failing validation land in `rejected`.
pub fn parse_detections(text: &str) -> Result<DetectionSet, DetectError> {
    let mut set = DetectionSet::default();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| DetectError::Malformed { line, reason };
        let tok: Vec<&str> = body.split_whitespace().collect();
        if tok.len() != 8 {
            return Err(malformed(format!("expected 8 fields, found {}", tok.len())));
        }
        let int = |i: usize, what: &str| -> Result<u64, DetectError> {
            tok[i].parse().map_err(|_| malformed(format!("bad {what} {:?}", tok[i])))
        };
        let num = |i: usize| -> Result<f64, DetectError> {
            tok[i].parse().map_err(|_| malformed(format!("bad number {:?}", tok[i])))
        };
        let camera_id = u32::try_from(int(0, "camera id")?)
            .map_err(|_| malformed("camera id out of range".into()))?;
        let frame_id = int(1, "frame id")?;
        let class = u16::try_from(int(2, "class id")?).unwrap_or(u16::MAX);
        let bbox = BBox::new(num(4)?, num(5)?, num(6)?, num(7)?);
        match Detection::new(camera_id, frame_id, class, num(3)?, bbox) {
            Ok(d) => set.detections.push(d),
            Err(reason) => set.rejected.push(Rejection { line, reason }),
        }
    }
    Ok(set)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<DetectionSet, DetectError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DetectError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_detections(&text)
}

pub fn write_detections(path: impl AsRef<Path>, dets: &[Detection]) -> std::io::Result<()> {
    let mut text = String::from("# camera_id frame_id class_id confidence x_min y_min x_max y_max\n");
    for d in dets {
        text.push_str(&d.to_line());
        text.push('\n');
    }
    std::fs::write(path, text)
}

/// Split detections into (kept, rejected) by the quarter-image rule: a box
/// whose area exceeds a quarter of the image area is rejected. Order is
/// preserved in both halves.
pub fn filter_oversized(dets: Vec<Detection>, cam: &CameraModel) -> (Vec<Detection>, Vec<Detection>) {
    let limit = cam.intrinsics.area() / 4.0;
    dets.into_iter().partition(|d| d.bbox.area() <= limit)
}

/// Keep detections whose class is in `allow`; an empty set keeps everything.
pub fn restrict_classes(dets: Vec<Detection>, allow: &BTreeSet<u8>) -> Vec<Detection> {
    if allow.is_empty() {
        return dets;
    }
    dets.into_iter().filter(|d| allow.contains(&d.class_id)).collect()
}

/// Keep detections with `confidence >= min_confidence`.
pub fn filter_confidence(dets: Vec<Detection>, min_confidence: f64) -> Vec<Detection> {
    dets.into_iter().filter(|d| d.confidence >= min_confidence).collect()
}

/// Clip boxes to the camera image, dropping boxes that fall entirely outside.
pub fn clip_to_image(dets: Vec<Detection>, cam: &CameraModel) -> Vec<Detection> {
    let (w, h) = (cam.intrinsics.width as f64, cam.intrinsics.height as f64);
    dets.into_iter()
        .filter_map(|mut d| {
            d.bbox = d.bbox.clip(w, h)?;
            Some(d)
        })
        .collect()
}
