//! Synthetic scenes with known ground truth.
//!
//! Every object is an ellipsoidal blob of points placed in front of one
//! camera. Its detection box is the pixel bounding box of its projected
//! points, so by construction every object point lies in its own box. Each box
//! also receives frustum noise: points along the rays through random pixels
//! of the box, half in a depth band in front of the object and half in a
//! band behind it. The rest of the cloud is ground returns that stay outside
//! every box.
//!
//! Point order within a frame: object points (object by object), then each
//! object's noise, then ground. The ground-truth column holds the object id
//! for object points and -1 for everything else.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::{
    save_rig, undistort_normalized, validate_rig, CalibError, CameraModel, DistortionCoeffs,
    ExtrinsicPose, Intrinsics,
};
use crate::cloud::{
    write_manifest, write_pcd, FrameIndex, PcdEncoding, PcdError, Point3, PointCloudFrame, Stream,
};
use crate::detect::{write_detections, BBox, Detection};
use crate::fusion::{CameraDetections, DistortionMode};
use crate::rng::{derive_seed, SplitMix64};

/// Placement attempts per object before giving up.
const MAX_PLACEMENT_TRIES: usize = 2000;
/// Sampling attempts per noise or ground point.
const MAX_POINT_TRIES: usize = 1000;

/// Object classes cycled through by the generator: class id and ellipsoid
/// semi-axes (length, width, height) in meters.
const PLANTED_CLASSES: [(u8, [f64; 3]); 3] = [(2, [2.2, 0.9, 0.75]), (0, [0.3, 0.3, 0.9]), (7, [3.5, 1.2, 1.5])];

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Calib(#[from] CalibError),
    #[error("frame {frame}: cannot place object {object} in view of camera {camera}")]
    Placement { frame: u64, object: usize, camera: u32 },
    #[error("frame {frame}: cannot sample {what} points")]
    Sampling { frame: u64, what: &'static str },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pcd(#[from] PcdError),
}

/// Parameters of a generated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub frames: usize,
    /// Objects per frame.
    pub objects: usize,
    /// Share of noise among the points inside each box, in `[0, 1)`.
    pub noise_fraction: f64,
    pub points_per_object: usize,
    /// Ground points per frame.
    pub background_points: usize,
    pub seed: u64,
    /// Projection used to draw the boxes; the pipeline must run with the same mode.
    pub distortion: DistortionMode,
    /// Closest noise depth to the object's bounding sphere (m).
    pub noise_gap: f64,
    /// Farthest noise depth from the object's bounding sphere (m).
    pub noise_spread: f64,
    /// Camera-frame depth range of object centers (m).
    pub object_depth: (f64, f64),
    /// Height of the ground plane in the LIDAR frame (m).
    pub ground_z: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            frames: 3,
            objects: 4,
            noise_fraction: 0.3,
            points_per_object: 1500,
            background_points: 20_000,
            seed: 0,
            distortion: DistortionMode::Off,
            noise_gap: 2.0,
            noise_spread: 12.0,
            object_depth: (8.0, 25.0),
            ground_z: -1.7,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::Spec(m.into()));
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return bad("noise fraction must lie in [0, 1)");
        }
        let (o0, o1) = self.object_depth;
        if !(o0 > 0.0 && o0 < o1 && o1.is_finite()) {
            return bad("object depth range must be positive and increasing");
        }
        if !(self.noise_gap >= 0.0 && self.noise_gap < self.noise_spread && self.noise_spread.is_finite()) {
            return bad("noise band needs 0 <= gap < spread");
        }
        if self.objects > 0 && self.points_per_object == 0 {
            return bad("objects need at least one point");
        }
        Ok(())
    }

    /// Noise points planted in each box.
    pub fn noise_per_object(&self) -> usize {
        let f = self.noise_fraction;
        (self.points_per_object as f64 * f / (1.0 - f)).round() as usize
    }

    /// Points per frame: objects, their noise, and ground.
    pub fn points_per_frame(&self) -> usize {
        self.objects * (self.points_per_object + self.noise_per_object()) + self.background_points
    }

    /// Set the ground count so that each frame holds exactly `total` points.
    pub fn with_total_points(mut self, total: usize) -> Result<Self, SceneError> {
        let planted = self.objects * (self.points_per_object + self.noise_per_object());
        self.background_points = total
            .checked_sub(planted)
            .ok_or_else(|| SceneError::Spec(format!("{planted} planted points exceed total {total}")))?;
        Ok(self)
    }
}

/// Five cameras at 72° yaw steps around a LIDAR with x forward, y left, z up.
/// 640x480 images, 80° horizontal field of view, mild barrel distortion.
pub fn default_rig() -> Vec<CameraModel> {
    (0..5u32)
        .map(|id| {
            let yaw = (id as f64 * 72.0).to_radians();
            let (s, c) = yaw.sin_cos();
            // Rows are the camera axes (right, down, forward) in the LIDAR frame.
            let rotation = Matrix3::new(s, -c, 0.0, 0.0, 0.0, -1.0, c, s, 0.0);
            let center = Vector3::new(0.1 * c, 0.1 * s, -0.2);
            CameraModel {
                id,
                intrinsics: Intrinsics {
                    fx: 380.0,
                    fy: 380.0,
                    cx: 320.0,
                    cy: 240.0,
                    width: 640,
                    height: 480,
                },
                distortion: DistortionCoeffs::from_opencv([-0.05, 0.01, 0.001, -0.001, 0.0]),
                pose: ExtrinsicPose {
                    rotation,
                    translation: -(rotation * center),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedObject {
    pub id: usize,
    pub class_id: u8,
    pub camera_id: u32,
    /// Ellipsoid center in the LIDAR frame.
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub yaw: f64,
    /// `[x_min, y_min, x_max, y_max]` in pixels.
    pub bbox: [f64; 4],
    pub points: usize,
    pub noise_points: usize,
}

/// One generated frame held in memory.
#[derive(Debug, Clone)]
pub struct SceneFrame {
    pub cloud: PointCloudFrame,
    /// Every camera of the rig, possibly with no detections.
    pub detections: CameraDetections,
    pub truth: Vec<i32>,
    pub objects: Vec<PlantedObject>,
}

fn to_point(p: Vector3<f64>, rng: &mut SplitMix64) -> Point3 {
    Point3::new(p.x as f32, p.y as f32, p.z as f32).with_intensity(rng.uniform(0.0, 1.0) as f32)
}

/// Pixel to the LIDAR-frame point at camera depth `z`.
fn back_project(cam: &CameraModel, mode: DistortionMode, u: f64, v: f64, z: f64) -> Option<Vector3<f64>> {
    let k = &cam.intrinsics;
    let (mut x, mut y) = ((u - k.cx) / k.fx, (v - k.cy) / k.fy);
    if mode == DistortionMode::On {
        (x, y) = undistort_normalized(&cam.distortion, x, y).ok()?;
    }
    let pc = Vector3::new(x * z, y * z, z);
    Some(cam.pose.rotation.transpose() * (pc - cam.pose.translation))
}

fn unit_ball(rng: &mut SplitMix64) -> Vector3<f64> {
    loop {
        let p = Vector3::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        if p.norm_squared() <= 1.0 {
            return p;
        }
    }
}

fn overlaps(a: &BBox, b: &BBox) -> bool {
    a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max
}

/// Pixel bounding box of projected points, half-open on integer pixels.
/// `None` if a point does not project or the box leaves the image.
fn pixel_box(cam: &CameraModel, mode: DistortionMode, pts: &[Point3]) -> Option<BBox> {
    let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        let (u, v) = cam.project(&p.position(), mode == DistortionMode::On)?;
        u0 = u0.min(u);
        v0 = v0.min(v);
        u1 = u1.max(u);
        v1 = v1.max(v);
    }
    let b = BBox::new(u0.floor(), v0.floor(), u1.floor() + 1.0, v1.floor() + 1.0);
    let k = &cam.intrinsics;
    let inside = b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= k.width as f64 && b.y_max <= k.height as f64;
    inside.then_some(b)
}

fn visible_in(cam: &CameraModel, mode: DistortionMode, p: &Point3) -> Option<(f64, f64)> {
    cam.project(&p.position(), mode == DistortionMode::On)
        .filter(|&(u, v)| cam.intrinsics.contains(u, v))
}

struct Placed {
    points: Vec<Point3>,
    bbox: BBox,
    /// Camera-frame depth of the center.
    depth: f64,
    object: PlantedObject,
}

fn place_object(
    spec: &SceneSpec,
    rig: &[CameraModel],
    cam_idx: usize,
    id: usize,
    boxes: &[(u32, BBox)],
    rng: &mut SplitMix64,
    frame_id: u64,
) -> Result<Placed, SceneError> {
    let cam = &rig[cam_idx];
    let mode = spec.distortion;
    let (class_id, semi_axes) = PLANTED_CLASSES[id % PLANTED_CLASSES.len()];
    let k = &cam.intrinsics;
    let (w, h) = (k.width as f64, k.height as f64);
    for _ in 0..MAX_PLACEMENT_TRIES {
        let u = rng.uniform(0.3 * w, 0.7 * w);
        let v = rng.uniform(0.45 * h, 0.55 * h);
        let depth = rng.uniform(spec.object_depth.0, spec.object_depth.1);
        let yaw = rng.uniform(0.0, std::f64::consts::TAU);
        let Some(center) = back_project(cam, mode, u, v, depth) else {
            continue;
        };
        let (s, c) = yaw.sin_cos();
        let rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        let axes = Vector3::from(semi_axes);
        let points: Vec<Point3> = (0..spec.points_per_object)
            .map(|_| to_point(center + rot * unit_ball(rng).component_mul(&axes), rng))
            .collect();
        let Some(bbox) = pixel_box(cam, mode, &points) else {
            continue;
        };
        if bbox.area() > k.area() / 4.0
            || boxes.iter().any(|(cid, b)| *cid == cam.id && overlaps(b, &bbox))
        {
            continue;
        }
        let seen_elsewhere = rig
            .iter()
            .filter(|o| o.id != cam.id)
            .any(|o| points.iter().any(|p| visible_in(o, mode, p).is_some()));
        if seen_elsewhere {
            continue;
        }
        let object = PlantedObject {
            id,
            class_id,
            camera_id: cam.id,
            center: center.into(),
            semi_axes,
            yaw,
            bbox: [bbox.x_min, bbox.y_min, bbox.x_max, bbox.y_max],
            points: points.len(),
            noise_points: 0,
        };
        return Ok(Placed {
            points,
            bbox,
            depth,
            object,
        });
    }
    Err(SceneError::Placement {
        frame: frame_id,
        object: id,
        camera: cam.id,
    })
}

/// Closest camera depth given to noise points (m).
const MIN_NOISE_DEPTH: f64 = 0.5;

/// Noise along the rays of `placed`'s box. Even-numbered points go in front
/// of the object, odd ones behind it; if the object is too close to the
/// camera for a front band, all go behind.
fn frustum_noise(
    spec: &SceneSpec,
    cam: &CameraModel,
    placed: &Placed,
    n: usize,
    rng: &mut SplitMix64,
    frame_id: u64,
) -> Result<Vec<Point3>, SceneError> {
    let mode = spec.distortion;
    let bbox = &placed.bbox;
    let radius = placed.object.semi_axes.iter().copied().fold(0.0, f64::max);
    let near = placed.depth - radius;
    let far = placed.depth + radius;
    let front = ((near - spec.noise_spread).max(MIN_NOISE_DEPTH), near - spec.noise_gap);
    let behind = (far + spec.noise_gap, far + spec.noise_spread);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let band = if out.len() % 2 == 0 && front.0 < front.1 { front } else { behind };
        let p = (0..MAX_POINT_TRIES)
            .find_map(|_| {
                let u = rng.uniform(bbox.x_min, bbox.x_max);
                let v = rng.uniform(bbox.y_min, bbox.y_max);
                let z = rng.uniform(band.0, band.1);
                let p = to_point(back_project(cam, mode, u, v, z)?, rng);
                // f32 rounding can push an edge sample out of the box.
                let (pu, pv) = visible_in(cam, mode, &p)?;
                bbox.contains(pu, pv).then_some(p)
            })
            .ok_or(SceneError::Sampling {
                frame: frame_id,
                what: "noise",
            })?;
        out.push(p);
    }
    Ok(out)
}

fn ground(
    spec: &SceneSpec,
    rig: &[CameraModel],
    boxes: &[(u32, BBox)],
    rng: &mut SplitMix64,
    frame_id: u64,
) -> Result<Vec<Point3>, SceneError> {
    let mode = spec.distortion;
    let cams: BTreeMap<u32, &CameraModel> = rig.iter().map(|c| (c.id, c)).collect();
    let mut out = Vec::with_capacity(spec.background_points);
    while out.len() < spec.background_points {
        let p = (0..MAX_POINT_TRIES)
            .find_map(|_| {
                let r = rng.uniform(3.0, 50.0);
                let a = rng.uniform(0.0, std::f64::consts::TAU);
                let z = spec.ground_z + rng.uniform(-0.05, 0.05);
                let p = to_point(Vector3::new(r * a.cos(), r * a.sin(), z), rng);
                let in_box = boxes.iter().any(|(cid, b)| {
                    visible_in(cams[cid], mode, &p).is_some_and(|(u, v)| b.contains(u, v))
                });
                (!in_box).then_some(p)
            })
            .ok_or(SceneError::Sampling {
                frame: frame_id,
                what: "ground",
            })?;
        out.push(p);
    }
    Ok(out)
}

/// Generate one frame. Object `i` is placed in front of camera `i mod n`.
pub fn generate_frame(
    spec: &SceneSpec,
    rig: &[CameraModel],
    frame_id: u64,
    timestamp: f64,
) -> Result<SceneFrame, SceneError> {
    spec.validate()?;
    validate_rig(rig)?;
    let mut rng = SplitMix64::new(derive_seed(spec.seed, &[frame_id]));

    let mut placed: Vec<Placed> = Vec::with_capacity(spec.objects);
    let mut boxes: Vec<(u32, BBox)> = Vec::with_capacity(spec.objects);
    for id in 0..spec.objects {
        let p = place_object(spec, rig, id % rig.len(), id, &boxes, &mut rng, frame_id)?;
        boxes.push((p.object.camera_id, p.bbox));
        placed.push(p);
    }

    let mut points = Vec::with_capacity(spec.points_per_frame());
    let mut truth = Vec::with_capacity(spec.points_per_frame());
    for p in &placed {
        truth.extend(std::iter::repeat_n(p.object.id as i32, p.points.len()));
        points.extend_from_slice(&p.points);
    }
    let n_noise = spec.noise_per_object();
    for p in &mut placed {
        let cam = rig.iter().find(|c| c.id == p.object.camera_id).expect("placed in rig camera");
        let noise = frustum_noise(spec, cam, p, n_noise, &mut rng, frame_id)?;
        p.object.noise_points = noise.len();
        truth.extend(std::iter::repeat_n(-1, noise.len()));
        points.extend(noise);
    }
    let bg = ground(spec, rig, &boxes, &mut rng, frame_id)?;
    truth.extend(std::iter::repeat_n(-1, bg.len()));
    points.extend(bg);

    let mut detections: CameraDetections = rig.iter().map(|c| (c.id, Vec::new())).collect();
    for p in &placed {
        let confidence = (rng.uniform(0.5, 1.0) * 1000.0).round() / 1000.0;
        let det = Detection::new(p.object.camera_id, frame_id, p.object.class_id as u16, confidence, p.bbox)
            .expect("generated detections are valid");
        detections.get_mut(&p.object.camera_id).expect("rig camera").push(det);
    }

    Ok(SceneFrame {
        cloud: PointCloudFrame::new(frame_id, timestamp, points),
        detections,
        truth,
        objects: placed.into_iter().map(|p| p.object).collect(),
    })
}

/// Files written by [`gen_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePaths {
    pub calib: PathBuf,
    pub clouds: PathBuf,
    pub dets: PathBuf,
    pub objects: PathBuf,
    pub truth_dir: PathBuf,
}

impl ScenePaths {
    pub fn new(dir: &Path) -> Self {
        Self {
            calib: dir.join("calib.json"),
            clouds: dir.join("clouds.manifest"),
            dets: dir.join("dets.manifest"),
            objects: dir.join("objects.json"),
            truth_dir: dir.join("truth"),
        }
    }

    pub fn truth(&self, frame_id: u64) -> PathBuf {
        self.truth_dir.join(format!("frame_{frame_id:06}.txt"))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SceneError + '_ {
    move |source| SceneError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read a ground-truth file: one object id (or -1) per point.
pub fn read_truth(path: impl AsRef<Path>) -> std::io::Result<Vec<i32>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}

/// Write a sequence of `spec.frames` frames under `dir`: the rig, both
/// manifests, one PCD per frame, one detection file per camera and frame,
/// ground truth and the planted-object list.
///
/// Frame `i` has id `i` and timestamp `i/10` s; camera `c` (by rig position)
/// is stamped `5·(c+1)` ms later.
pub fn gen_scene(spec: &SceneSpec, rig: &[CameraModel], dir: &Path) -> Result<ScenePaths, SceneError> {
    spec.validate()?;
    validate_rig(rig)?;
    let paths = ScenePaths::new(dir);
    for sub in ["clouds", "dets", "truth"] {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    save_rig(rig, &paths.calib).map_err(io_err(&paths.calib))?;

    let mut lidar = FrameIndex::new();
    let mut cams: BTreeMap<u32, FrameIndex> = rig.iter().map(|c| (c.id, FrameIndex::new())).collect();
    let mut objects = Vec::new();
    for i in 0..spec.frames as u64 {
        let timestamp = i as f64 / 10.0;
        let f = generate_frame(spec, rig, i, timestamp)?;

        let pcd = dir.join(format!("clouds/frame_{i:06}.pcd"));
        write_pcd(&f.cloud, None, &pcd, PcdEncoding::Binary)?;
        lidar
            .push(crate::cloud::IndexEntry {
                frame_id: i,
                timestamp,
                path: pcd,
            })
            .expect("timestamps increase");

        for (pos, cam) in rig.iter().enumerate() {
            let path = dir.join(format!("dets/cam{}_{i:06}.txt", cam.id));
            write_detections(&path, &f.detections[&cam.id]).map_err(io_err(&path))?;
            let stamp = (i * 100 + 5 * (pos as u64 + 1)) as f64 / 1000.0;
            cams.get_mut(&cam.id)
                .expect("rig camera")
                .push(crate::cloud::IndexEntry {
                    frame_id: i,
                    timestamp: stamp,
                    path,
                })
                .expect("timestamps increase");
        }

        let truth_path = paths.truth(i);
        let mut text = String::with_capacity(f.truth.len() * 3);
        for t in &f.truth {
            text.push_str(&t.to_string());
            text.push('\n');
        }
        std::fs::write(&truth_path, text).map_err(io_err(&truth_path))?;
        objects.extend(f.objects.into_iter().map(|o| (i, o)));
    }

    write_manifest(&paths.clouds, &[(Stream::Lidar, &lidar)], dir).map_err(io_err(&paths.clouds))?;
    let cam_streams: Vec<(Stream, &FrameIndex)> =
        cams.iter().map(|(id, idx)| (Stream::Camera(*id), idx)).collect();
    write_manifest(&paths.dets, &cam_streams, dir).map_err(io_err(&paths.dets))?;

    #[derive(Serialize)]
    struct Entry<'a> {
        frame_id: u64,
        #[serde(flatten)]
        object: &'a PlantedObject,
    }
    let entries: Vec<Entry> = objects.iter().map(|(f, o)| Entry { frame_id: *f, object: o }).collect();
    let json = serde_json::to_string_pretty(&entries).expect("objects serialize");
    std::fs::write(&paths.objects, json).map_err(io_err(&paths.objects))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::label_frame;

    fn small() -> SceneSpec {
        SceneSpec {
            objects: 5,
            points_per_object: 300,
            background_points: 2000,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn default_rig_is_valid() {
        validate_rig(&default_rig()).unwrap();
    }

    #[test]
    fn noise_count_matches_fraction() {
        let spec = SceneSpec {
            points_per_object: 700,
            noise_fraction: 0.3,
            ..Default::default()
        };
        assert_eq!(spec.noise_per_object(), 300);
        assert_eq!(SceneSpec { noise_fraction: 0.0, ..spec }.noise_per_object(), 0);
    }

    #[test]
    fn noise_fraction_one_is_rejected() {
        let spec = SceneSpec {
            noise_fraction: 1.0,
            ..Default::default()
        };
        assert!(matches!(spec.validate(), Err(SceneError::Spec(_))));
    }

    #[test]
    fn total_points_is_exact() {
        let spec = small().with_total_points(10_000).unwrap();
        let f = generate_frame(&spec, &default_rig(), 0, 0.0).unwrap();
        assert_eq!(f.cloud.len(), 10_000);
        assert_eq!(f.truth.len(), 10_000);
    }

    #[test]
    fn object_points_project_into_own_box() {
        for mode in [DistortionMode::Off, DistortionMode::On] {
            let spec = SceneSpec { distortion: mode, ..small() };
            let rig = default_rig();
            let f = generate_frame(&spec, &rig, 3, 0.3).unwrap();
            for (p, &t) in f.cloud.points.iter().zip(&f.truth) {
                if t < 0 {
                    continue;
                }
                let o = &f.objects[t as usize];
                let cam = rig.iter().find(|c| c.id == o.camera_id).unwrap();
                let (u, v) = cam.project(&p.position(), mode == DistortionMode::On).unwrap();
                let b = BBox::new(o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3]);
                assert!(b.contains(u, v), "{mode:?}: object {t} point at ({u}, {v}) outside {b:?}");
            }
        }
    }

    #[test]
    fn labels_are_exactly_objects_and_noise() {
        let spec = small();
        let rig = default_rig();
        let f = generate_frame(&spec, &rig, 1, 0.1).unwrap();
        let lc = label_frame(&f.cloud, &rig, &f.detections, spec.distortion).unwrap();
        let planted = spec.objects * (spec.points_per_object + spec.noise_per_object());
        for (i, l) in lc.labels.iter().enumerate() {
            assert_eq!(l.is_labeled(), i < planted, "point {i}");
        }
    }

    #[test]
    fn no_objects_means_no_detections() {
        let spec = SceneSpec { objects: 0, ..small() };
        let f = generate_frame(&spec, &default_rig(), 0, 0.0).unwrap();
        assert!(f.detections.values().all(Vec::is_empty));
        assert!(f.truth.iter().all(|&t| t == -1));
    }

    #[test]
    fn same_seed_same_frame() {
        let a = generate_frame(&small(), &default_rig(), 2, 0.2).unwrap();
        let b = generate_frame(&small(), &default_rig(), 2, 0.2).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.objects, b.objects);
    }

    #[test]
    fn object_straddling_the_camera_cannot_be_placed() {
        // Centers 1-2 cm ahead put half of every blob behind the camera.
        let rig = vec![default_rig()[0]];
        let spec = SceneSpec {
            object_depth: (0.01, 0.02),
            ..small()
        };
        assert!(matches!(
            generate_frame(&spec, &rig, 0, 0.0),
            Err(SceneError::Placement { .. })
        ));
    }
}
