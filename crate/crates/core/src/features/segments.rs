//! Segment label files: one `start_sec<TAB>end_sec<TAB>label` line per segment.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::Speaker;

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start_sec: f64,
    pub end_sec: f64,
    /// `None` for spans marked as anything other than child or adult
    /// (overlap, silence, ...). Such spans label no frames.
    pub speaker: Option<Speaker>,
}

pub fn parse_segments(text: &str) -> Result<Vec<Segment>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let num = |s: &str| {
            s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("bad time value '{}'", s),
            })
        };
        let (start_sec, end_sec) = (num(fields[0])?, num(fields[1])?);
        if end_sec < start_sec {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("segment ends ({}) before it starts ({})", end_sec, start_sec),
            });
        }
        out.push(Segment {
            start_sec,
            end_sec,
            speaker: fields[2].parse::<Speaker>().ok(),
        });
    }
    Ok(out)
}

pub fn read_segments(path: &Path) -> Result<Vec<Segment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_segments(&text)
}

pub fn write_segments(path: &Path, segments: &[Segment]) -> Result<()> {
    let mut s = String::new();
    for seg in segments {
        let label = seg.speaker.map_or("none", |sp| sp.as_str());
        writeln!(s, "{:.3}\t{:.3}\t{}", seg.start_sec, seg.end_sec, label).unwrap();
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Assigns each frame the label of the segments covering its centre time.
/// Frames covered by no segment, by an unlabeled span, or by conflicting
/// labels get `None`.
pub fn frame_labels(segments: &[Segment], n_frames: usize, center_sec: impl Fn(usize) -> f64) -> Vec<Option<Speaker>> {
    (0..n_frames)
        .map(|i| {
            let t = center_sec(i);
            let mut label: Option<Option<Speaker>> = None;
            for seg in segments.iter().filter(|s| s.start_sec <= t && t < s.end_sec) {
                match label {
                    None => label = Some(seg.speaker),
                    Some(prev) if prev != seg.speaker => return None,
                    _ => {}
                }
            }
            label.flatten()
        })
        .collect()
}
