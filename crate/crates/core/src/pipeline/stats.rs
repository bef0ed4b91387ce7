//! Plain-text views of report CSVs.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::segment::{aggregate_reports, FrameReport};

fn series(label: &str, values: impl Iterator<Item = usize>) -> String {
    let v: Vec<String> = values.map(|n| n.to_string()).collect();
    format!("{label}: {}\n", v.join(" "))
}

/// Per-frame table, min/max/mean drop rate and the before/after series.
/// Frames without labeled points are flagged and left out of the summary.
pub fn format_stats(reports: &[FrameReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>8}",
        "frame", "points", "before", "after", "dropped", "drop%"
    );
    for r in reports {
        let _ = write!(
            s,
            "{:>8} {:>10} {:>10} {:>10} {:>10} {:>8.2}",
            r.frame_id, r.total_points, r.labeled_before, r.kept_after, r.dropped, r.drop_rate_percent
        );
        if r.is_empty() {
            s.push_str("  (no labeled points)");
        }
        s.push('\n');
    }
    let summary = aggregate_reports(reports);
    let _ = writeln!(s, "\nframes: {}", reports.len());
    if !summary.empty_frames.is_empty() {
        let ids: Vec<String> = summary.empty_frames.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "excluded (no labeled points): {}", ids.join(" "));
    }
    match (summary.max, summary.min, summary.mean) {
        (Some((fmax, max)), Some((fmin, min)), Some(mean)) => {
            let _ = writeln!(s, "max drop rate:  {max:.2}% (frame {fmax})");
            let _ = writeln!(s, "min drop rate:  {min:.2}% (frame {fmin})");
            let _ = writeln!(s, "mean drop rate: {mean:.2}%");
        }
        _ => s.push_str("no frame has labeled points\n"),
    }
    s.push_str(&series("before", reports.iter().map(|r| r.labeled_before)));
    s.push_str(&series("after", reports.iter().map(|r| r.kept_after)));
    s
}

/// Per-frame deltas between two reports of the same sequence, `b - a`.
/// Frames present in only one report are listed with `-` for the other.
pub fn format_comparison(a: &[FrameReport], b: &[FrameReport]) -> String {
    let mut frames: BTreeMap<u64, (Option<&FrameReport>, Option<&FrameReport>)> = BTreeMap::new();
    for r in a {
        frames.entry(r.frame_id).or_default().0 = Some(r);
    }
    for r in b {
        frames.entry(r.frame_id).or_default().1 = Some(r);
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9}",
        "frame", "before_a", "after_a", "before_b", "after_b", "d_before", "d_after", "d_drop%"
    );
    let cell = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for (id, (ra, rb)) in &frames {
        let delta = |f: fn(&FrameReport) -> usize| {
            ra.zip(*rb).map(|(x, y)| (f(y) as i64 - f(x) as i64).to_string())
        };
        let _ = writeln!(
            s,
            "{:>8} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9}",
            id,
            cell(ra.map(|r| r.labeled_before.to_string())),
            cell(ra.map(|r| r.kept_after.to_string())),
            cell(rb.map(|r| r.labeled_before.to_string())),
            cell(rb.map(|r| r.kept_after.to_string())),
            cell(delta(|r| r.labeled_before)),
            cell(delta(|r| r.kept_after)),
            cell(ra.zip(*rb).map(|(x, y)| format!("{:.2}", y.drop_rate_percent - x.drop_rate_percent))),
        );
    }
    let (sa, sb) = (aggregate_reports(a), aggregate_reports(b));
    if let (Some(ma), Some(mb)) = (sa.mean, sb.mean) {
        let _ = writeln!(s, "\nmean drop rate: a {ma:.2}%  b {mb:.2}%  delta {:.2}", mb - ma);
    }
    s
}
