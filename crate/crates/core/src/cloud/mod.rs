//! Point-cloud frames, PCD I/O and the timestamped frame index.

mod index;
mod pcd;

pub use index::{
    load_manifest, match_frames, parse_manifest, write_manifest, CameraMatch, FrameBundle,
    FrameIndex, IndexEntry, Manifest, ManifestError, Stream, DEFAULT_MATCH_TOLERANCE,
};
pub use pcd::{
    parse_pcd, read_pcd, write_pcd, write_pcd_to, PcdData, PcdEncoding, PcdError,
};

use nalgebra::Vector3;

/// One LIDAR return. Coordinates are meters in the LIDAR frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: Option<f32>,
}

impl Point3 {
    pub fn new(x: f32, y: f32, z: f32) -> Self {
        Self {
            x,
            y,
            z,
            intensity: None,
        }
    }

    pub fn with_intensity(mut self, intensity: f32) -> Self {
        self.intensity = Some(intensity);
        self
    }

    #[inline]
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x as f64, self.y as f64, self.z as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// A timestamped LIDAR sweep. Point order is stable: a point's index is its
/// identifier for labeling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloudFrame {
    pub frame_id: u64,
    /// Seconds.
    pub timestamp: f64,
    pub points: Vec<Point3>,
}

impl PointCloudFrame {
    pub fn new(frame_id: u64, timestamp: f64, points: Vec<Point3>) -> Self {
        Self {
            frame_id,
            timestamp,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
