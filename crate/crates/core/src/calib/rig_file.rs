//! JSON calibration files.
//!
//! ```json
//! { "cameras": [ { "id": 0, "width": 640, "height": 480,
//!                  "fx": 600, "fy": 600, "cx": 320, "cy": 240,
//!                  "dist": [k1, k2, p1, p2, k3],
//!                  "rotation": [r00, r01, r02, r10, r11, r12, r20, r21, r22],
//!                  "translation": [tx, ty, tz] } ] }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_rig, CalibError, CameraModel, DistortionCoeffs, ExtrinsicPose, Intrinsics};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigFile {
    cameras: Vec<CameraEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraEntry {
    id: u32,
    width: u32,
    height: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    dist: [f64; 5],
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl From<&CameraEntry> for CameraModel {
    fn from(e: &CameraEntry) -> Self {
        CameraModel {
            id: e.id,
            intrinsics: Intrinsics {
                fx: e.fx,
                fy: e.fy,
                cx: e.cx,
                cy: e.cy,
                width: e.width,
                height: e.height,
            },
            distortion: DistortionCoeffs::from_opencv(e.dist),
            pose: ExtrinsicPose::from_row_major(e.rotation, e.translation),
        }
    }
}

impl From<&CameraModel> for CameraEntry {
    fn from(c: &CameraModel) -> Self {
        let k = &c.intrinsics;
        CameraEntry {
            id: c.id,
            width: k.width,
            height: k.height,
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            dist: c.distortion.to_opencv(),
            rotation: c.pose.rotation_row_major(),
            translation: c.pose.translation.into(),
        }
    }
}

/// Parse and validate a calibration document.
pub fn parse_rig(text: &str) -> Result<Vec<CameraModel>, CalibError> {
    let file: RigFile = serde_json::from_str(text)?;
    let rig: Vec<CameraModel> = file.cameras.iter().map(CameraModel::from).collect();
    validate_rig(&rig)?;
    Ok(rig)
}

/// Load and validate a calibration file. Camera order is preserved.
pub fn load_rig(path: impl AsRef<Path>) -> Result<Vec<CameraModel>, CalibError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CalibError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_rig(&text)
}

pub fn rig_to_json(rig: &[CameraModel]) -> String {
    let file = RigFile {
        cameras: rig.iter().map(CameraEntry::from).collect(),
    };
    serde_json::to_string_pretty(&file).expect("rig serialization is infallible")
}

pub fn save_rig(rig: &[CameraModel], path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, rig_to_json(rig) + "\n")
}
