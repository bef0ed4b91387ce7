//! Cluster-based denoising of detection frusta.
//!
//! Each detection's labeled points are clustered with k-means and only the
//! largest cluster is kept. Everything else the box swept up (ground in
//! front of the object, structures behind it) is marked dropped.

mod kmeans;
mod report;

pub use kmeans::{kmeans, kmeans_traced, Clustering, KMeansConfig, KMeansError};
pub use report::{
    aggregate_reports, read_report_csv, write_report_csv, ClassCounts, FrameRate, FrameReport,
    ReportError, SequenceSummary,
};

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::cloud::PointCloudFrame;
use crate::fusion::{DetectionRef, LabeledCloud, PointLabel};
use crate::rng::derive_seed;

/// What happened to one detection's points.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub detection: DetectionRef,
    pub points: usize,
    pub kept: usize,
    pub kept_cluster: usize,
    pub clustering: Clustering,
}

/// Seed of the k-means stream for one detection of one frame. Depends only on
/// the identifiers, so detections can be clustered in any order.
pub fn detection_seed(base: u64, frame_id: u64, det: DetectionRef) -> u64 {
    derive_seed(base, &[frame_id, det.camera_id as u64, det.index as u64])
}

/// Pick the cluster to keep: the most members; ties go to the centroid
/// nearest the sensor origin, then to the lower id.
fn keep_cluster(c: &Clustering) -> usize {
    let sizes = c.cluster_sizes();
    (0..c.k)
        .min_by(|&a, &b| {
            sizes[b]
                .cmp(&sizes[a])
                .then(c.centroids[a].norm_squared().total_cmp(&c.centroids[b].norm_squared()))
                .then(a.cmp(&b))
        })
        .expect("clustering has at least one cluster")
}

fn denoise_indices(
    frame: &PointCloudFrame,
    lc: &mut LabeledCloud,
    det: DetectionRef,
    indices: &[usize],
    cfg: &KMeansConfig,
) -> Result<DetectionOutcome, KMeansError> {
    let coords: Vec<Vector3<f64>> = indices.iter().map(|&i| frame.points[i].position()).collect();
    let cfg = KMeansConfig {
        seed: detection_seed(cfg.seed, lc.frame_id, det),
        ..*cfg
    };
    let clustering = kmeans(&coords, &cfg)?;
    let keep = keep_cluster(&clustering);
    let mut kept = 0;
    for (&i, &cluster) in indices.iter().zip(&clustering.assignments) {
        if let PointLabel::Labeled(a) = &mut lc.labels[i] {
            a.cluster_id = Some(cluster as u32);
            a.kept = cluster == keep;
            kept += a.kept as usize;
        }
    }
    Ok(DetectionOutcome {
        detection: det,
        points: indices.len(),
        kept,
        kept_cluster: keep,
        clustering,
    })
}

/// Cluster the points of one detection and keep its largest cluster.
/// Labels of other detections are untouched.
pub fn denoise_detection(
    frame: &PointCloudFrame,
    lc: &mut LabeledCloud,
    det: DetectionRef,
    cfg: &KMeansConfig,
) -> Result<DetectionOutcome, KMeansError> {
    let indices = lc.points_of(det);
    denoise_indices(frame, lc, det, &indices, cfg)
}

/// Denoise every detection of the frame in (camera id, detection index) order
/// and report before/after counts.
pub fn denoise_frame(
    frame: &PointCloudFrame,
    lc: &LabeledCloud,
    cfg: &KMeansConfig,
) -> Result<(LabeledCloud, FrameReport), KMeansError> {
    cfg.validate()?;
    let mut groups: BTreeMap<DetectionRef, Vec<usize>> = BTreeMap::new();
    for (i, l) in lc.labels.iter().enumerate() {
        if let Some(a) = l.assignment() {
            groups.entry(a.detection).or_default().push(i);
        }
    }
    let mut out = lc.clone();
    for (det, indices) in &groups {
        denoise_indices(frame, &mut out, *det, indices, cfg)?;
    }
    let report = FrameReport::compare(frame.len(), lc, &out);
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Point3;
    use crate::fusion::Assignment;
    use crate::rng::SplitMix64;

    fn labeled(det: DetectionRef, class_id: u8) -> PointLabel {
        PointLabel::Labeled(Assignment {
            class_id,
            detection: det,
            cluster_id: None,
            kept: true,
        })
    }

    const D0: DetectionRef = DetectionRef { camera_id: 0, index: 0 };
    const D1: DetectionRef = DetectionRef { camera_id: 1, index: 0 };

    /// 900 points in a 0.2 m blob at (5,0,0) followed by 100 points spread
    /// along the ray out to (50,0,0).
    fn blob_and_ray(rng: &mut SplitMix64) -> Vec<Point3> {
        let mut pts: Vec<Point3> = (0..900)
            .map(|_| {
                Point3::new(
                    (5.0 + rng.uniform(-0.2, 0.2)) as f32,
                    rng.uniform(-0.2, 0.2) as f32,
                    rng.uniform(-0.2, 0.2) as f32,
                )
            })
            .collect();
        pts.extend((0..100).map(|i| Point3::new(5.5 + 44.5 * i as f32 / 99.0, 0.0, 0.0)));
        pts
    }

    #[test]
    fn blob_survives_ray_noise() {
        for seed in 0..10 {
            let mut rng = SplitMix64::new(seed + 100);
            let frame = PointCloudFrame::new(0, 0.0, blob_and_ray(&mut rng));
            let mut lc = LabeledCloud {
                frame_id: 0,
                labels: vec![labeled(D0, 2); frame.len()],
            };
            let cfg = KMeansConfig { k: 3, seed, ..Default::default() };
            let out = denoise_detection(&frame, &mut lc, D0, &cfg).unwrap();
            let blob_kept = lc.labels[..900].iter().filter(|l| l.is_kept()).count();
            assert!(blob_kept >= 850, "seed {seed}: only {blob_kept} blob points kept");
            assert_eq!(out.kept, lc.kept_count());
            assert!(lc.labels.iter().all(|l| l.assignment().unwrap().cluster_id.is_some()));
        }
    }

    #[test]
    fn identical_points_drop_nothing() {
        let frame = PointCloudFrame::new(0, 0.0, vec![Point3::new(4.0, 1.0, 0.5); 20]);
        let mut lc = LabeledCloud {
            frame_id: 0,
            labels: vec![labeled(D0, 0); 20],
        };
        let out = denoise_detection(&frame, &mut lc, D0, &KMeansConfig::default()).unwrap();
        assert_eq!(out.kept, 20);
        assert_eq!(lc.kept_count(), 20);
    }

    #[test]
    fn size_tie_goes_to_centroid_nearest_origin() {
        let pts = vec![
            Point3::new(30.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 8.0),
            Point3::new(-3.0, 4.0, 0.0),
        ];
        let frame = PointCloudFrame::new(0, 0.0, pts);
        for seed in 0..10 {
            let mut lc = LabeledCloud {
                frame_id: 0,
                labels: vec![labeled(D0, 0); 3],
            };
            let cfg = KMeansConfig { k: 3, seed, ..Default::default() };
            denoise_detection(&frame, &mut lc, D0, &cfg).unwrap();
            let kept: Vec<bool> = lc.labels.iter().map(PointLabel::is_kept).collect();
            assert_eq!(kept, vec![false, false, true], "seed {seed}");
        }
    }

    #[test]
    fn other_detections_untouched() {
        let mut rng = SplitMix64::new(1);
        let mut pts = blob_and_ray(&mut rng);
        pts.push(Point3::new(-7.0, 0.0, 0.0));
        let frame = PointCloudFrame::new(0, 0.0, pts);
        let mut labels = vec![labeled(D0, 2); 1000];
        labels.push(labeled(D1, 0));
        let mut lc = LabeledCloud { frame_id: 0, labels };
        let before = lc.labels[1000];
        denoise_detection(&frame, &mut lc, D0, &KMeansConfig::default()).unwrap();
        assert_eq!(lc.labels[1000], before);
    }

    #[test]
    fn empty_frame_reports_zero_rate() {
        let frame = PointCloudFrame::new(9, 0.0, vec![Point3::new(1.0, 0.0, 0.0); 4]);
        let lc = LabeledCloud::unlabeled(&frame);
        let (out, report) = denoise_frame(&frame, &lc, &KMeansConfig::default()).unwrap();
        assert_eq!(out, lc);
        assert!(report.is_empty());
        assert_eq!(report.drop_rate_percent, 0.0);
        assert_eq!(report.total_points, 4);
    }

    #[test]
    fn order_of_detections_does_not_matter() {
        let mut rng = SplitMix64::new(4);
        let mut pts = blob_and_ray(&mut rng);
        let shifted: Vec<Point3> = pts.iter().map(|p| Point3::new(-p.x, p.y + 3.0, p.z)).collect();
        pts.extend(shifted);
        let frame = PointCloudFrame::new(3, 0.0, pts);
        let labels: Vec<PointLabel> = (0..2000).map(|i| labeled(if i < 1000 { D0 } else { D1 }, 2)).collect();
        let lc = LabeledCloud { frame_id: 3, labels };
        let cfg = KMeansConfig { seed: 11, ..Default::default() };

        let (frame_result, report) = denoise_frame(&frame, &lc, &cfg).unwrap();

        let mut forward = lc.clone();
        denoise_detection(&frame, &mut forward, D0, &cfg).unwrap();
        denoise_detection(&frame, &mut forward, D1, &cfg).unwrap();
        let mut backward = lc.clone();
        denoise_detection(&frame, &mut backward, D1, &cfg).unwrap();
        denoise_detection(&frame, &mut backward, D0, &cfg).unwrap();

        assert_eq!(forward, backward);
        assert_eq!(forward, frame_result);
        assert_eq!(report.kept_after + report.dropped, report.labeled_before);
        assert_eq!(report.labeled_before, 2000);
    }
}
