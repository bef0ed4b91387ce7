//! Camera geometry: intrinsics, lens distortion, LIDAR-to-camera extrinsics
//! and pinhole projection.
//!
//! Conventions: the extrinsic pose maps LIDAR-frame points into the camera
//! frame (`p_cam = R·p_lidar + t`). The camera frame is the usual optical
//! frame (z forward, x right, y down).

mod distortion;
mod rig_file;

pub use distortion::{
    distort_normalized, undistort_normalized, DistortionCoeffs, UndistortError,
    UNDISTORT_MAX_ITER, UNDISTORT_STEP_TOL,
};
pub use rig_file::{load_rig, parse_rig, rig_to_json, save_rig};

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Points at or closer than this depth (camera frame, meters) never project.
pub const DEFAULT_Z_MIN: f64 = 1e-6;
/// Tolerance for the orthonormality and determinant checks on rotations.
pub const ROTATION_TOL: f64 = 1e-9;
/// Largest rig the loader accepts.
pub const MAX_CAMERAS: usize = 5;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("cannot read calibration file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed calibration file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("camera {id}: {reason}")]
    InvalidCamera { id: u32, reason: String },
    #[error("camera {id}: rotation is not orthonormal (max |RᵀR - I| = {deviation:e})")]
    NonOrthonormal { id: u32, deviation: f64 },
    #[error("camera {id}: rotation is a reflection (det = {det})")]
    Reflection { id: u32, det: f64 },
    #[error("duplicate camera id {0}")]
    DuplicateId(u32),
    #[error("rig must hold 1 to {MAX_CAMERAS} cameras, found {0}")]
    RigSize(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    fn validate(&self) -> Result<(), String> {
        let all = [self.fx, self.fy, self.cx, self.cy];
        if !all.iter().all(|v| v.is_finite()) {
            return Err("non-finite intrinsic".into());
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(format!("focal lengths must be positive (fx={}, fy={})", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return Err("image size must be positive".into());
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            ));
        }
        Ok(())
    }

    /// Image area in square pixels.
    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }

    /// True when the pixel lies in `[0, width) x [0, height)`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

/// Rigid transform from the LIDAR frame to a camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl ExtrinsicPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build from a 9-element row-major rotation and a translation.
    pub fn from_row_major(rotation: [f64; 9], translation: [f64; 3]) -> Self {
        Self {
            rotation: Matrix3::from_row_slice(&rotation),
            translation: Vector3::from(translation),
        }
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
        ]
    }

    /// `max |RᵀR - I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }

    fn validate(&self, id: u32) -> Result<(), CalibError> {
        if !self.rotation.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err(CalibError::InvalidCamera {
                id,
                reason: "non-finite pose".into(),
            });
        }
        let deviation = self.orthonormality_error();
        if deviation >= ROTATION_TOL {
            return Err(CalibError::NonOrthonormal { id, deviation });
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() >= ROTATION_TOL {
            return Err(CalibError::Reflection { id, det });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub id: u32,
    pub intrinsics: Intrinsics,
    pub distortion: DistortionCoeffs,
    pub pose: ExtrinsicPose,
}

impl CameraModel {
    /// Check every per-camera invariant.
    pub fn validate(&self) -> Result<(), CalibError> {
        self.intrinsics
            .validate()
            .map_err(|reason| CalibError::InvalidCamera { id: self.id, reason })?;
        if !self.distortion.is_finite() {
            return Err(CalibError::InvalidCamera {
                id: self.id,
                reason: "non-finite distortion coefficient".into(),
            });
        }
        self.pose.validate(self.id)
    }

    pub fn project(&self, p_lidar: &Vector3<f64>, use_distortion: bool) -> Option<(f64, f64)> {
        project(self, p_lidar, use_distortion)
    }
}

/// Validate a whole rig: size, unique ids, and every camera.
pub fn validate_rig(rig: &[CameraModel]) -> Result<(), CalibError> {
    if rig.is_empty() || rig.len() > MAX_CAMERAS {
        return Err(CalibError::RigSize(rig.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for cam in rig {
        if !seen.insert(cam.id) {
            return Err(CalibError::DuplicateId(cam.id));
        }
        cam.validate()?;
    }
    Ok(())
}

/// `rotation·p + translation`.
#[inline]
pub fn world_to_camera(pose: &ExtrinsicPose, p: &Vector3<f64>) -> Vector3<f64> {
    pose.rotation * p + pose.translation
}

/// Project a LIDAR-frame point to pixel coordinates with the default depth cutoff.
pub fn project(cam: &CameraModel, p_lidar: &Vector3<f64>, use_distortion: bool) -> Option<(f64, f64)> {
    project_with_cutoff(cam, p_lidar, use_distortion, DEFAULT_Z_MIN)
}

/// Project a LIDAR-frame point to pixel coordinates.
///
/// Returns `None` when the camera-frame depth is `<= z_min`. Pixels outside the
/// image are still returned.
pub fn project_with_cutoff(
    cam: &CameraModel,
    p_lidar: &Vector3<f64>,
    use_distortion: bool,
    z_min: f64,
) -> Option<(f64, f64)> {
    let pc = world_to_camera(&cam.pose, p_lidar);
    if !(pc.z > z_min) {
        return None;
    }
    let (mut x, mut y) = (pc.x / pc.z, pc.y / pc.z);
    if use_distortion {
        (x, y) = distort_normalized(&cam.distortion, x, y);
    }
    let k = &cam.intrinsics;
    Some((k.fx * x + k.cx, k.fy * y + k.cy))
}
