//! Per-frame drop statistics and the report CSV.
//!
//! CSV columns: `frame_id,total_points,labeled_before,kept_after,dropped,drop_rate_percent`
//! followed by `<class>_before,<class>_after` for every class seen in the
//! sequence (class names with spaces replaced by underscores, ascending class id).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::detect::{class_id, class_name};
use crate::fusion::{class_point_counts, kept_class_counts, LabeledCloud};

const FIXED_COLUMNS: [&str; 6] = [
    "frame_id",
    "total_points",
    "labeled_before",
    "kept_after",
    "dropped",
    "drop_rate_percent",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report CSV {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("report CSV {path}: {reason}")]
    Malformed { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClassCounts {
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameReport {
    pub frame_id: u64,
    pub total_points: usize,
    pub labeled_before: usize,
    pub kept_after: usize,
    pub dropped: usize,
    pub drop_rate_percent: f64,
    pub per_class: BTreeMap<u8, ClassCounts>,
}

impl FrameReport {
    /// Report for a denoising pass that turned `before` into `after`.
    pub fn compare(total_points: usize, before: &LabeledCloud, after: &LabeledCloud) -> Self {
        let labeled_before = before.labeled_count();
        let kept_after = after.kept_count();
        let mut per_class: BTreeMap<u8, ClassCounts> = BTreeMap::new();
        for (c, n) in class_point_counts(before) {
            per_class.entry(c).or_default().before = n;
        }
        for (c, n) in kept_class_counts(after) {
            per_class.entry(c).or_default().after = n;
        }
        Self::from_counts(before.frame_id, total_points, labeled_before, kept_after, per_class)
    }

    /// Report for a frame that was not denoised: everything labeled is kept.
    pub fn without_denoise(total_points: usize, lc: &LabeledCloud) -> Self {
        Self::compare(total_points, lc, lc)
    }

    pub fn from_counts(
        frame_id: u64,
        total_points: usize,
        labeled_before: usize,
        kept_after: usize,
        per_class: BTreeMap<u8, ClassCounts>,
    ) -> Self {
        let dropped = labeled_before.saturating_sub(kept_after);
        let drop_rate_percent = if labeled_before == 0 {
            0.0
        } else {
            100.0 * dropped as f64 / labeled_before as f64
        };
        Self {
            frame_id,
            total_points,
            labeled_before,
            kept_after: labeled_before - dropped,
            dropped,
            drop_rate_percent,
            per_class,
        }
    }

    /// No labeled points: nothing recognized in this frame.
    pub fn is_empty(&self) -> bool {
        self.labeled_before == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRate {
    pub frame_id: u64,
    pub drop_rate_percent: f64,
    pub labeled_before: usize,
    pub kept_after: usize,
    pub empty: bool,
}

/// Sequence-level view of the per-frame reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceSummary {
    pub frames: Vec<FrameRate>,
    /// Highest drop rate among non-empty frames as `(frame_id, rate)`; the
    /// first frame wins ties.
    pub max: Option<(u64, f64)>,
    pub min: Option<(u64, f64)>,
    /// Mean drop rate over non-empty frames.
    pub mean: Option<f64>,
    pub empty_frames: Vec<u64>,
}

pub fn aggregate_reports(reports: &[FrameReport]) -> SequenceSummary {
    let frames: Vec<FrameRate> = reports
        .iter()
        .map(|r| FrameRate {
            frame_id: r.frame_id,
            drop_rate_percent: r.drop_rate_percent,
            labeled_before: r.labeled_before,
            kept_after: r.kept_after,
            empty: r.is_empty(),
        })
        .collect();
    let mut max: Option<(u64, f64)> = None;
    let mut min: Option<(u64, f64)> = None;
    let mut sum = 0.0;
    let mut n = 0usize;
    for f in frames.iter().filter(|f| !f.empty) {
        let rate = f.drop_rate_percent;
        if max.is_none_or(|(_, m)| rate > m) {
            max = Some((f.frame_id, rate));
        }
        if min.is_none_or(|(_, m)| rate < m) {
            min = Some((f.frame_id, rate));
        }
        sum += rate;
        n += 1;
    }
    SequenceSummary {
        empty_frames: frames.iter().filter(|f| f.empty).map(|f| f.frame_id).collect(),
        frames,
        max,
        min,
        mean: (n > 0).then(|| sum / n as f64),
    }
}

fn column_name(class: u8) -> String {
    class_name(class).unwrap_or("unknown").replace(' ', "_")
}

pub fn write_report_csv(path: impl AsRef<Path>, reports: &[FrameReport]) -> Result<(), ReportError> {
    let path = path.as_ref();
    let err = |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    };
    let classes: BTreeSet<u8> = reports.iter().flat_map(|r| r.per_class.keys().copied()).collect();
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    for &c in &classes {
        header.push(format!("{}_before", column_name(c)));
        header.push(format!("{}_after", column_name(c)));
    }
    w.write_record(&header).map_err(err)?;
    for r in reports {
        let mut row = vec![
            r.frame_id.to_string(),
            r.total_points.to_string(),
            r.labeled_before.to_string(),
            r.kept_after.to_string(),
            r.dropped.to_string(),
            format!("{:.4}", r.drop_rate_percent),
        ];
        for c in &classes {
            let counts = r.per_class.get(c).copied().unwrap_or_default();
            row.push(counts.before.to_string());
            row.push(counts.after.to_string());
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}

/// Read a report CSV back. The drop rate is recomputed from the counts.
pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<FrameReport>, ReportError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let err = |source| ReportError::Csv {
        path: shown.clone(),
        source,
    };
    let malformed = |reason: String| ReportError::Malformed {
        path: shown.clone(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let header = r.headers().map_err(err)?.clone();
    if header.len() < FIXED_COLUMNS.len()
        || header.iter().zip(FIXED_COLUMNS).any(|(h, want)| h.trim() != want)
    {
        return Err(malformed(format!("header must start with {}", FIXED_COLUMNS.join(","))));
    }
    let extra: Vec<&str> = header.iter().skip(FIXED_COLUMNS.len()).collect();
    if !extra.len().is_multiple_of(2) {
        return Err(malformed("per-class columns must come in before/after pairs".into()));
    }
    let mut classes = Vec::new();
    for pair in extra.chunks(2) {
        let name = pair[0]
            .strip_suffix("_before")
            .filter(|n| pair[1].strip_suffix("_after") == Some(n))
            .ok_or_else(|| malformed(format!("bad class column pair {} {}", pair[0], pair[1])))?;
        classes.push(class_id(name).ok_or_else(|| malformed(format!("unknown class column {name}")))?);
    }

    let mut reports = Vec::new();
    for (row_no, rec) in r.records().enumerate() {
        let rec = rec.map_err(err)?;
        let field = |i: usize| -> Result<u64, ReportError> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| malformed(format!("row {}: bad value in column {}", row_no + 1, header.get(i).unwrap_or("?"))))
        };
        let mut per_class = BTreeMap::new();
        for (j, &c) in classes.iter().enumerate() {
            let i = FIXED_COLUMNS.len() + 2 * j;
            let counts = ClassCounts {
                before: field(i)? as usize,
                after: field(i + 1)? as usize,
            };
            if counts != ClassCounts::default() {
                per_class.insert(c, counts);
            }
        }
        let (labeled, kept, dropped) = (field(2)? as usize, field(3)? as usize, field(4)? as usize);
        if kept + dropped != labeled {
            return Err(malformed(format!("row {}: kept_after + dropped != labeled_before", row_no + 1)));
        }
        reports.push(FrameReport::from_counts(field(0)?, field(1)? as usize, labeled, kept, per_class));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(frame_id: u64, labeled: usize, kept: usize) -> FrameReport {
        FrameReport::from_counts(frame_id, 1000, labeled, kept, BTreeMap::new())
    }

    #[test]
    fn rate_arithmetic() {
        let r = report(0, 200, 150);
        assert_eq!((r.dropped, r.drop_rate_percent), (50, 25.0));
        let e = report(1, 0, 0);
        assert!(e.is_empty());
        assert_eq!(e.drop_rate_percent, 0.0);
    }

    #[test]
    fn summary_of_three() {
        let s = aggregate_reports(&[report(0, 100, 90), report(1, 100, 80), report(2, 100, 70)]);
        assert!((s.mean.unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(s.max.unwrap().0, 2);
        assert!((s.max.unwrap().1 - 30.0).abs() < 1e-12);
        assert_eq!(s.min.unwrap().0, 0);
        assert!((s.min.unwrap().1 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn single_frame_is_min_and_max() {
        let s = aggregate_reports(&[report(4, 10, 7)]);
        assert_eq!(s.min, s.max);
        assert_eq!(s.max.unwrap().0, 4);
    }

    #[test]
    fn empty_frames_are_excluded_and_flagged() {
        let s = aggregate_reports(&[report(0, 100, 50), report(1, 0, 0), report(2, 100, 100)]);
        assert_eq!(s.empty_frames, vec![1]);
        assert_eq!(s.mean, Some(25.0));
        assert_eq!(s.min, Some((2, 0.0)));
        assert_eq!(aggregate_reports(&[]).mean, None);
    }

    #[test]
    fn extreme_rates_are_located() {
        // 49.43% and 5.53% as exact count ratios.
        let mut reports: Vec<_> = (0..60).map(|i| report(i, 10_000, 7_000)).collect();
        reports[46] = report(46, 10_000, 10_000 - 4_943);
        reports[26] = report(26, 10_000, 10_000 - 553);
        let s = aggregate_reports(&reports);
        assert_eq!(s.max.unwrap().0, 46);
        assert!((s.max.unwrap().1 - 49.43).abs() < 1e-9);
        assert_eq!(s.min.unwrap().0, 26);
        assert!((s.min.unwrap().1 - 5.53).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut a = report(0, 10, 7);
        a.per_class.insert(2, ClassCounts { before: 10, after: 7 });
        let mut b = report(1, 5, 5);
        b.per_class.insert(9, ClassCounts { before: 5, after: 5 });
        let reports = vec![a, b, report(2, 0, 0)];
        write_report_csv(&path, &reports).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "frame_id,total_points,labeled_before,kept_after,dropped,drop_rate_percent,car_before,car_after,traffic_light_before,traffic_light_after"
        );
        assert_eq!(text.lines().nth(1).unwrap(), "0,1000,10,7,3,30.0000,10,7,0,0");
        assert_eq!(read_report_csv(&path).unwrap(), reports);
    }

    #[test]
    fn malformed_csv_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "frame,total\n1,2\n").unwrap();
        assert!(read_report_csv(&path).is_err());
        std::fs::write(
            &path,
            "frame_id,total_points,labeled_before,kept_after,dropped,drop_rate_percent\n0,10,5,4,2,40\n",
        )
        .unwrap();
        assert!(matches!(read_report_csv(&path), Err(ReportError::Malformed { .. })));
        assert!(read_report_csv(dir.path().join("missing.csv")).is_err());
    }
}
