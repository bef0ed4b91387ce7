//! Detection-guided LIDAR point labeling.
//!
//! LIDAR points are projected into calibrated cameras; points that land in a
//! 2D detection box take the box's class, and each box's points are then
//! denoised by keeping the largest k-means cluster.
//!
//! - [`calib`]: camera models, lens distortion and projection
//! - [`cloud`]: point-cloud frames, PCD files, frame manifests and time matching
//! - [`detect`]: detection records and box filters
//! - [`fusion`]: point labeling from detections
//! - [`segment`]: k-means denoising and drop-rate reports
//! - [`pipeline`]: end-to-end runs over a sequence
//! - [`scene`]: synthetic scenes with ground truth

pub mod calib;
pub mod cloud;
pub mod detect;
pub mod fusion;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod segment;
