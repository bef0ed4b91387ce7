//! PCD v0.7 reader and writer (`ascii` and `binary` data).
//!
//! `x`, `y`, `z` must be 4-byte floats. `intensity`, `label` and `cluster` are
//! picked up when present; any other field is skipped. Points with a
//! non-finite coordinate are dropped and counted.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::{Point3, PointCloudFrame};
use crate::fusion::LabeledCloud;

#[derive(Debug, Error)]
pub enum PcdError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing header field {0}")]
    MissingHeader(&'static str),
    #[error("duplicate header field {0}")]
    DuplicateHeader(String),
    #[error("malformed header line {line}: {reason}")]
    BadHeader { line: usize, reason: String },
    #[error("unsupported DATA mode {0:?}")]
    UnsupportedData(String),
    #[error("field {field}: {reason}")]
    BadField { field: String, reason: String },
    #[error("header declares {declared} points but data holds {found}")]
    CountMismatch { declared: usize, found: String },
    #[error("malformed data row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("{labels} label records for {points} points")]
    LabelMismatch { labels: usize, points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcdEncoding {
    Ascii,
    #[default]
    Binary,
}

/// Result of parsing a PCD file.
#[derive(Debug, Clone, PartialEq)]
pub struct PcdData {
    /// Frame with `frame_id = 0` and `timestamp = 0`; the frame index supplies both.
    pub frame: PointCloudFrame,
    /// Points dropped for a non-finite coordinate.
    pub rejected: usize,
    pub labels: Option<Vec<i32>>,
    pub clusters: Option<Vec<i32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    F4,
    F8,
    I1,
    I2,
    I4,
    I8,
    U1,
    U2,
    U4,
    U8,
}

impl Scalar {
    fn new(kind: &str, size: usize) -> Option<Self> {
        Some(match (kind, size) {
            ("F", 4) => Self::F4,
            ("F", 8) => Self::F8,
            ("I", 1) => Self::I1,
            ("I", 2) => Self::I2,
            ("I", 4) => Self::I4,
            ("I", 8) => Self::I8,
            ("U", 1) => Self::U1,
            ("U", 2) => Self::U2,
            ("U", 4) => Self::U4,
            ("U", 8) => Self::U8,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I1 | Self::U1 => 1,
            Self::I2 | Self::U2 => 2,
            Self::F4 | Self::I4 | Self::U4 => 4,
            Self::F8 | Self::I8 | Self::U8 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        macro_rules! le {
            ($t:ty) => {
                <$t>::from_le_bytes(b.try_into().unwrap()) as f64
            };
        }
        match self {
            Self::F4 => le!(f32),
            Self::F8 => le!(f64),
            Self::I1 => le!(i8),
            Self::I2 => le!(i16),
            Self::I4 => le!(i32),
            Self::I8 => le!(i64),
            Self::U1 => le!(u8),
            Self::U2 => le!(u16),
            Self::U4 => le!(u32),
            Self::U8 => le!(u64),
        }
    }
}

#[derive(Debug, Clone)]
struct Field {
    name: String,
    scalar: Scalar,
    count: usize,
}

#[derive(Debug)]
struct Header {
    fields: Vec<Field>,
    points: usize,
    binary: bool,
}

/// Where a named field lives: byte offset for binary, token index for ascii.
#[derive(Debug, Clone, Copy)]
struct Slot {
    scalar: Scalar,
    byte: usize,
    token: usize,
}

struct Layout {
    stride: usize,
    tokens: usize,
    xyz: [Slot; 3],
    intensity: Option<Slot>,
    label: Option<Slot>,
    cluster: Option<Slot>,
}

impl Layout {
    fn new(fields: &[Field]) -> Result<Self, PcdError> {
        let mut slots: HashMap<&str, Slot> = HashMap::new();
        let (mut byte, mut token) = (0, 0);
        for f in fields {
            if matches!(f.name.as_str(), "x" | "y" | "z" | "intensity" | "label" | "cluster") {
                if f.count != 1 {
                    return Err(PcdError::BadField {
                        field: f.name.clone(),
                        reason: format!("COUNT must be 1, got {}", f.count),
                    });
                }
                slots.insert(
                    &f.name,
                    Slot {
                        scalar: f.scalar,
                        byte,
                        token,
                    },
                );
            }
            byte += f.scalar.size() * f.count;
            token += f.count;
        }
        let coord = |name: &'static str| -> Result<Slot, PcdError> {
            let slot = *slots.get(name).ok_or_else(|| PcdError::BadField {
                field: name.into(),
                reason: "required field missing".into(),
            })?;
            if slot.scalar != Scalar::F4 {
                return Err(PcdError::BadField {
                    field: name.into(),
                    reason: "must be a 4-byte float (TYPE F, SIZE 4)".into(),
                });
            }
            Ok(slot)
        };
        Ok(Self {
            stride: byte,
            tokens: token,
            xyz: [coord("x")?, coord("y")?, coord("z")?],
            intensity: slots.get("intensity").copied(),
            label: slots.get("label").copied(),
            cluster: slots.get("cluster").copied(),
        })
    }
}

/// Split off the header, returning it and the byte offset where data starts.
fn parse_header(bytes: &[u8]) -> Result<(Header, usize), PcdError> {
    let mut seen: HashMap<String, Vec<String>> = HashMap::new();
    let mut pos = 0;
    let mut line_no = 0;
    let mut data_mode = None;
    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |i| pos + i);
        line_no += 1;
        let line = std::str::from_utf8(&bytes[pos..end]).map_err(|_| PcdError::BadHeader {
            line: line_no,
            reason: "not UTF-8".into(),
        })?;
        pos = (end + 1).min(bytes.len());
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap().to_ascii_uppercase();
        let values: Vec<String> = parts.map(str::to_owned).collect();
        if !matches!(
            key.as_str(),
            "VERSION" | "FIELDS" | "SIZE" | "TYPE" | "COUNT" | "WIDTH" | "HEIGHT" | "VIEWPOINT"
                | "POINTS" | "DATA"
        ) {
            return Err(PcdError::BadHeader {
                line: line_no,
                reason: format!("unknown key {key}"),
            });
        }
        if seen.contains_key(&key) {
            return Err(PcdError::DuplicateHeader(key));
        }
        if key == "DATA" {
            data_mode = values.first().cloned();
            seen.insert(key, values);
            break;
        }
        seen.insert(key, values);
    }

    let get = |key: &'static str| seen.get(key).ok_or(PcdError::MissingHeader(key));
    let single_usize = |key: &'static str| -> Result<usize, PcdError> {
        let v = get(key)?;
        match v.as_slice() {
            [s] => s.parse().map_err(|_| PcdError::BadField {
                field: key.into(),
                reason: format!("not a count: {s}"),
            }),
            _ => Err(PcdError::BadField {
                field: key.into(),
                reason: "expected one value".into(),
            }),
        }
    };

    let mode = data_mode.ok_or(PcdError::MissingHeader("DATA"))?;
    let binary = match mode.as_str() {
        "ascii" => false,
        "binary" => true,
        _ => return Err(PcdError::UnsupportedData(mode)),
    };

    let names = get("FIELDS")?;
    let sizes = get("SIZE")?;
    let types = get("TYPE")?;
    let counts: Vec<String> = match seen.get("COUNT") {
        Some(c) => c.clone(),
        None => vec!["1".into(); names.len()],
    };
    if names.is_empty() || [sizes.len(), types.len(), counts.len()].iter().any(|&n| n != names.len()) {
        return Err(PcdError::BadField {
            field: "FIELDS".into(),
            reason: "FIELDS, SIZE, TYPE and COUNT lengths differ".into(),
        });
    }
    let mut fields = Vec::with_capacity(names.len());
    for i in 0..names.len() {
        let name = &names[i];
        if fields.iter().any(|f: &Field| &f.name == name) {
            return Err(PcdError::DuplicateHeader(format!("FIELDS {name}")));
        }
        let bad = |reason: String| PcdError::BadField {
            field: name.clone(),
            reason,
        };
        let size: usize = sizes[i].parse().map_err(|_| bad(format!("bad SIZE {}", sizes[i])))?;
        let count: usize = counts[i].parse().map_err(|_| bad(format!("bad COUNT {}", counts[i])))?;
        let scalar = Scalar::new(&types[i], size)
            .ok_or_else(|| bad(format!("unsupported TYPE {} SIZE {size}", types[i])))?;
        if count == 0 {
            return Err(bad("COUNT must be positive".into()));
        }
        fields.push(Field {
            name: name.clone(),
            scalar,
            count,
        });
    }

    let width = single_usize("WIDTH")?;
    let height = single_usize("HEIGHT")?;
    let points = single_usize("POINTS")?;
    if width * height != points {
        return Err(PcdError::CountMismatch {
            declared: points,
            found: format!("WIDTH x HEIGHT = {}", width * height),
        });
    }
    Ok((
        Header {
            fields,
            points,
            binary,
        },
        pos,
    ))
}

#[derive(Default)]
struct Builder {
    points: Vec<Point3>,
    labels: Option<Vec<i32>>,
    clusters: Option<Vec<i32>>,
    rejected: usize,
}

impl Builder {
    fn new(layout: &Layout, capacity: usize) -> Self {
        Self {
            points: Vec::with_capacity(capacity),
            labels: layout.label.map(|_| Vec::with_capacity(capacity)),
            clusters: layout.cluster.map(|_| Vec::with_capacity(capacity)),
            rejected: 0,
        }
    }

    fn push(&mut self, xyz: [f32; 3], intensity: Option<f64>, label: Option<f64>, cluster: Option<f64>) {
        let p = Point3 {
            x: xyz[0],
            y: xyz[1],
            z: xyz[2],
            intensity: intensity.filter(|i| !i.is_nan()).map(|i| i as f32),
        };
        if !p.is_finite() {
            self.rejected += 1;
            return;
        }
        self.points.push(p);
        if let (Some(v), Some(l)) = (self.labels.as_mut(), label) {
            v.push(l as i32);
        }
        if let (Some(v), Some(c)) = (self.clusters.as_mut(), cluster) {
            v.push(c as i32);
        }
    }

    fn finish(self) -> PcdData {
        PcdData {
            frame: PointCloudFrame::new(0, 0.0, self.points),
            rejected: self.rejected,
            labels: self.labels,
            clusters: self.clusters,
        }
    }
}

fn parse_binary(data: &[u8], header: &Header, layout: &Layout) -> Result<PcdData, PcdError> {
    let expected = header.points * layout.stride;
    if data.len() != expected {
        return Err(PcdError::CountMismatch {
            declared: header.points,
            found: format!("{} bytes, expected {expected}", data.len()),
        });
    }
    let mut out = Builder::new(layout, header.points);
    let read = |row: &[u8], s: Slot| s.scalar.decode(&row[s.byte..s.byte + s.scalar.size()]);
    let read_f32 = |row: &[u8], s: Slot| f32::from_le_bytes(row[s.byte..s.byte + 4].try_into().unwrap());
    for row in data.chunks_exact(layout.stride.max(1)) {
        let xyz = layout.xyz.map(|s| read_f32(row, s));
        out.push(
            xyz,
            layout.intensity.map(|s| read(row, s)),
            layout.label.map(|s| read(row, s)),
            layout.cluster.map(|s| read(row, s)),
        );
    }
    Ok(out.finish())
}

fn parse_ascii(data: &[u8], header: &Header, layout: &Layout) -> Result<PcdData, PcdError> {
    let text = std::str::from_utf8(data).map_err(|_| PcdError::BadRow {
        row: 0,
        reason: "ascii data is not UTF-8".into(),
    })?;
    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if rows.len() != header.points {
        return Err(PcdError::CountMismatch {
            declared: header.points,
            found: format!("{} rows", rows.len()),
        });
    }
    let mut out = Builder::new(layout, header.points);
    let mut tokens = Vec::with_capacity(layout.tokens);
    for (i, row) in rows.iter().enumerate() {
        tokens.clear();
        tokens.extend(row.split_whitespace());
        if tokens.len() != layout.tokens {
            return Err(PcdError::BadRow {
                row: i,
                reason: format!("expected {} values, found {}", layout.tokens, tokens.len()),
            });
        }
        let bad = |t: &str| PcdError::BadRow {
            row: i,
            reason: format!("not a number: {t}"),
        };
        let num = |s: Slot| -> Result<f64, PcdError> {
            let t = tokens[s.token];
            t.parse::<f64>().map_err(|_| bad(t))
        };
        let coord = |s: Slot| -> Result<f32, PcdError> {
            let t = tokens[s.token];
            t.parse::<f32>().map_err(|_| bad(t))
        };
        let xyz = [coord(layout.xyz[0])?, coord(layout.xyz[1])?, coord(layout.xyz[2])?];
        out.push(
            xyz,
            layout.intensity.map(num).transpose()?,
            layout.label.map(num).transpose()?,
            layout.cluster.map(num).transpose()?,
        );
    }
    Ok(out.finish())
}

/// Parse an in-memory PCD file.
pub fn parse_pcd(bytes: &[u8]) -> Result<PcdData, PcdError> {
    let (header, offset) = parse_header(bytes)?;
    let layout = Layout::new(&header.fields)?;
    let data = &bytes[offset..];
    if header.binary {
        parse_binary(data, &header, &layout)
    } else {
        parse_ascii(data, &header, &layout)
    }
}

pub fn read_pcd(path: impl AsRef<Path>) -> Result<PcdData, PcdError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| PcdError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pcd(&bytes)
}

/// Serialize a frame. Fields are `x y z intensity`, plus `label cluster`
/// (class id or -1, kept cluster id or -1) when labels are given. A missing
/// intensity is written as NaN.
pub fn write_pcd_to<W: Write>(
    out: &mut W,
    frame: &PointCloudFrame,
    labels: Option<&LabeledCloud>,
    encoding: PcdEncoding,
) -> Result<(), PcdError> {
    let io = |source| PcdError::Io {
        path: "<writer>".into(),
        source,
    };
    if let Some(lc) = labels {
        if lc.len() != frame.len() {
            return Err(PcdError::LabelMismatch {
                labels: lc.len(),
                points: frame.len(),
            });
        }
    }
    let n = frame.len();
    let mut header = String::from("# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\n");
    if labels.is_some() {
        header.push_str("FIELDS x y z intensity label cluster\nSIZE 4 4 4 4 4 4\nTYPE F F F F I I\nCOUNT 1 1 1 1 1 1\n");
    } else {
        header.push_str("FIELDS x y z intensity\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\n");
    }
    let mode = match encoding {
        PcdEncoding::Ascii => "ascii",
        PcdEncoding::Binary => "binary",
    };
    let _ = write!(
        header,
        "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA {mode}\n"
    );

    let columns = |i: usize| -> Option<(i32, i32)> {
        labels.map(|lc| {
            let l = &lc.labels[i];
            (l.class_column(), l.cluster_column())
        })
    };

    let mut buf: Vec<u8> = header.into_bytes();
    match encoding {
        PcdEncoding::Binary => {
            let stride = if labels.is_some() { 24 } else { 16 };
            buf.reserve(n * stride);
            for (i, p) in frame.points.iter().enumerate() {
                buf.extend_from_slice(&p.x.to_le_bytes());
                buf.extend_from_slice(&p.y.to_le_bytes());
                buf.extend_from_slice(&p.z.to_le_bytes());
                buf.extend_from_slice(&p.intensity.unwrap_or(f32::NAN).to_le_bytes());
                if let Some((l, c)) = columns(i) {
                    buf.extend_from_slice(&l.to_le_bytes());
                    buf.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        PcdEncoding::Ascii => {
            let mut text = String::with_capacity(n * 40);
            for (i, p) in frame.points.iter().enumerate() {
                // Display for f32 is the shortest exact round-trip form.
                let _ = write!(text, "{} {} {} {}", p.x, p.y, p.z, p.intensity.unwrap_or(f32::NAN));
                if let Some((l, c)) = columns(i) {
                    let _ = write!(text, " {l} {c}");
                }
                text.push('\n');
            }
            buf.extend_from_slice(text.as_bytes());
        }
    }
    out.write_all(&buf).map_err(io)
}

pub fn write_pcd(
    frame: &PointCloudFrame,
    labels: Option<&LabeledCloud>,
    path: impl AsRef<Path>,
    encoding: PcdEncoding,
) -> Result<(), PcdError> {
    let path = path.as_ref();
    let io = |source| PcdError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut bytes = Vec::new();
    write_pcd_to(&mut bytes, frame, labels, encoding)?;
    std::fs::write(path, bytes).map_err(io)
}
