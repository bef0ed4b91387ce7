//! Frame manifests and nearest-timestamp matching between the LIDAR stream
//! and per-camera detection streams.
//!
//! Manifest format, one frame per line, `#` starts a comment:
//!
//! ```text
//! <stream> <frame_id> <timestamp> <path>
//! lidar 0 10.000 clouds/frame_000000.pcd
//! cam2  0  9.980 dets/cam2_000000.txt
//! ```
//!
//! `stream` is `lidar` or `cam<N>`. Relative paths resolve against the
//! manifest's directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

/// Default matching window in seconds.
pub const DEFAULT_MATCH_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("manifest line {line}: stream {stream} timestamp {timestamp} does not increase")]
    NotIncreasing {
        line: usize,
        stream: Stream,
        timestamp: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stream {
    Lidar,
    Camera(u32),
}

impl FromStr for Stream {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "lidar" {
            return Ok(Stream::Lidar);
        }
        s.strip_prefix("cam")
            .and_then(|n| n.parse().ok())
            .map(Stream::Camera)
            .ok_or_else(|| format!("unknown stream {s:?} (expected lidar or cam<N>)"))
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stream::Lidar => f.write_str("lidar"),
            Stream::Camera(id) => write!(f, "cam{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub frame_id: u64,
    pub timestamp: f64,
    pub path: PathBuf,
}

/// Entries of one stream with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameIndex {
    entries: Vec<IndexEntry>,
}

impl FrameIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append an entry; fails (returning it) if its timestamp does not
    /// exceed the last one.
    pub fn push(&mut self, entry: IndexEntry) -> Result<(), IndexEntry> {
        match self.entries.last() {
            Some(last) if !(entry.timestamp > last.timestamp) => Err(entry),
            _ => {
                self.entries.push(entry);
                Ok(())
            }
        }
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry nearest to `t`; on an exact tie the earlier entry wins.
    pub fn nearest(&self, t: f64) -> Option<&IndexEntry> {
        let i = self.entries.partition_point(|e| e.timestamp < t);
        let before = i.checked_sub(1).map(|j| &self.entries[j]);
        let after = self.entries.get(i);
        match (before, after) {
            (Some(b), Some(a)) => Some(if t - b.timestamp <= a.timestamp - t { b } else { a }),
            (b, a) => b.or(a),
        }
    }
}

impl FromIterator<(u64, f64, PathBuf)> for FrameIndex {
    /// Collects entries, sorting by timestamp. Duplicate timestamps keep the first.
    fn from_iter<I: IntoIterator<Item = (u64, f64, PathBuf)>>(iter: I) -> Self {
        let mut v: Vec<IndexEntry> = iter
            .into_iter()
            .map(|(frame_id, timestamp, path)| IndexEntry {
                frame_id,
                timestamp,
                path,
            })
            .collect();
        v.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        v.dedup_by(|b, a| a.timestamp == b.timestamp);
        Self { entries: v }
    }
}

/// All streams of one manifest file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub streams: BTreeMap<Stream, FrameIndex>,
}

impl Manifest {
    pub fn lidar(&self) -> Option<&FrameIndex> {
        self.streams.get(&Stream::Lidar)
    }

    /// Camera streams keyed by camera id.
    pub fn cameras(&self) -> BTreeMap<u32, FrameIndex> {
        self.streams
            .iter()
            .filter_map(|(s, idx)| match s {
                Stream::Camera(id) => Some((*id, idx.clone())),
                Stream::Lidar => None,
            })
            .collect()
    }
}

/// Parse manifest text; relative paths are joined onto `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest, ManifestError> {
    let mut manifest = Manifest::default();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| ManifestError::Malformed {
            line: line_no,
            reason,
        };
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [stream, frame_id, timestamp, path] = parts[..] else {
            return Err(malformed(format!("expected 4 fields, found {}", parts.len())));
        };
        let stream: Stream = stream.parse().map_err(malformed)?;
        let frame_id: u64 = frame_id
            .parse()
            .map_err(|_| malformed(format!("bad frame id {frame_id:?}")))?;
        let timestamp: f64 = timestamp
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| malformed(format!("bad timestamp {timestamp:?}")))?;
        let path = base.join(path);
        manifest
            .streams
            .entry(stream)
            .or_default()
            .push(IndexEntry {
                frame_id,
                timestamp,
                path,
            })
            .map_err(|_| ManifestError::NotIncreasing {
                line: line_no,
                stream,
                timestamp,
            })?;
    }
    Ok(manifest)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Write a manifest. Paths are written relative to `base` when possible.
pub fn write_manifest(
    path: impl AsRef<Path>,
    streams: &[(Stream, &FrameIndex)],
    base: &Path,
) -> std::io::Result<()> {
    let mut text = String::new();
    for (stream, index) in streams {
        for e in index.entries() {
            let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
            text.push_str(&format!("{stream} {} {} {}\n", e.frame_id, e.timestamp, rel.display()));
        }
    }
    std::fs::write(path, text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraMatch {
    pub frame_id: u64,
    pub timestamp: f64,
    pub path: PathBuf,
}

/// A LIDAR frame together with the nearest detection frame of every camera
/// that has one within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub cloud: IndexEntry,
    pub cameras: BTreeMap<u32, CameraMatch>,
}

impl FrameBundle {
    /// No camera matched this cloud.
    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}

/// Pair every cloud with, per camera, the nearest detection entry within
/// `tolerance` seconds (ties go to the earlier entry). Cameras without a
/// match are left out of the bundle.
pub fn match_frames(
    clouds: &FrameIndex,
    cameras: &BTreeMap<u32, FrameIndex>,
    tolerance: f64,
) -> Vec<FrameBundle> {
    clouds
        .entries()
        .iter()
        .map(|cloud| {
            let matched = cameras
                .iter()
                .filter_map(|(&cam, index)| {
                    let e = index.nearest(cloud.timestamp)?;
                    ((e.timestamp - cloud.timestamp).abs() <= tolerance).then(|| {
                        (
                            cam,
                            CameraMatch {
                                frame_id: e.frame_id,
                                timestamp: e.timestamp,
                                path: e.path.clone(),
                            },
                        )
                    })
                })
                .collect();
            FrameBundle {
                cloud: cloud.clone(),
                cameras: matched,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn index(stamps: &[f64]) -> FrameIndex {
        stamps
            .iter()
            .enumerate()
            .map(|(i, &t)| (i as u64, t, PathBuf::from(format!("f{i}"))))
            .collect()
    }

    fn one_camera(stamps: &[f64]) -> BTreeMap<u32, FrameIndex> {
        BTreeMap::from([(0, index(stamps))])
    }

    #[test]
    fn nearest_within_tolerance() {
        let bundles = match_frames(&index(&[10.0]), &one_camera(&[9.98, 10.30]), 0.05);
        assert_eq!(bundles[0].cameras[&0].timestamp, 9.98);
        assert!(!bundles[0].is_empty());
    }

    #[test]
    fn out_of_tolerance_is_flagged_empty() {
        let bundles = match_frames(&index(&[10.0]), &one_camera(&[10.30]), 0.05);
        assert_eq!(bundles.len(), 1);
        assert!(bundles[0].is_empty());
    }

    #[test]
    fn tie_goes_to_earlier_entry() {
        // Exactly representable tie.
        let bundles = match_frames(&index(&[10.0]), &one_camera(&[9.5, 10.5]), 1.0);
        assert_eq!(bundles[0].cameras[&0].frame_id, 0);
        // 10.0 - 9.95 and 10.05 - 10.0 both round to 0.0500000000000007.
        let bundles = match_frames(&index(&[10.0]), &one_camera(&[9.95, 10.05]), 0.1);
        assert_eq!(bundles[0].cameras[&0].timestamp, 9.95);
    }

    #[test]
    fn manifest_parsing() {
        let text = "# comment\nlidar 0 10.0 a.pcd\ncam1 0 9.98 d/c1.txt\nlidar 1 10.1 /abs/b.pcd\n";
        let m = parse_manifest(text, Path::new("/base")).unwrap();
        let lidar = m.lidar().unwrap();
        assert_eq!(lidar.len(), 2);
        assert_eq!(lidar.entries()[0].path, PathBuf::from("/base/a.pcd"));
        assert_eq!(lidar.entries()[1].path, PathBuf::from("/abs/b.pcd"));
        assert_eq!(m.cameras()[&1].entries()[0].path, PathBuf::from("/base/d/c1.txt"));
    }

    #[test]
    fn manifest_errors() {
        let base = Path::new(".");
        assert!(matches!(
            parse_manifest("lidar 0 1.0\n", base),
            Err(ManifestError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_manifest("radar 0 1.0 x\n", base),
            Err(ManifestError::Malformed { .. })
        ));
        assert!(matches!(
            parse_manifest("lidar 0 1.0 a\nlidar 1 1.0 b\n", base),
            Err(ManifestError::NotIncreasing { line: 2, .. })
        ));
        // Separate streams are checked independently.
        assert!(parse_manifest("lidar 0 1.0 a\ncam0 0 0.5 b\n", base).is_ok());
    }

    #[test]
    fn manifest_write_read() {
        let dir = tempfile::tempdir().unwrap();
        let idx: FrameIndex = [(0, 1.25, dir.path().join("x.pcd")), (3, 2.5, dir.path().join("y.pcd"))]
            .into_iter()
            .collect();
        let path = dir.path().join("m.txt");
        write_manifest(&path, &[(Stream::Camera(4), &idx)], dir.path()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "cam4 0 1.25 x.pcd\ncam4 3 2.5 y.pcd\n");
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.streams[&Stream::Camera(4)], idx);
    }

    proptest! {
        #[test]
        fn matches_are_unique_within_tolerance_and_monotone(
            cloud_steps in prop::collection::vec(0.01f64..0.2, 1..40),
            cam_steps in prop::collection::vec(0.01f64..0.2, 1..60),
            cam_offset in -0.5f64..0.5,
            tol in 0.001f64..0.1,
        ) {
            let mut t = 0.0;
            let clouds: Vec<f64> = cloud_steps.iter().map(|s| { t += s; t }).collect();
            let mut t = cam_offset;
            let cams: Vec<f64> = cam_steps.iter().map(|s| { t += s; t }).collect();
            let bundles = match_frames(&index(&clouds), &one_camera(&cams), tol);
            prop_assert_eq!(bundles.len(), clouds.len());
            let mut last = f64::NEG_INFINITY;
            for b in &bundles {
                prop_assert!(b.cameras.len() <= 1);
                if let Some(m) = b.cameras.get(&0) {
                    prop_assert!((m.timestamp - b.cloud.timestamp).abs() <= tol);
                    prop_assert!(m.timestamp >= last);
                    last = m.timestamp;
                    // Nothing strictly closer exists.
                    let best = cams.iter().map(|c| (c - b.cloud.timestamp).abs()).fold(f64::INFINITY, f64::min);
                    prop_assert_eq!((m.timestamp - b.cloud.timestamp).abs(), best);
                }
            }
        }
    }
}
