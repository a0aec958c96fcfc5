//! Session manifests: a header line `session\tdomain\taudio\tlabels\tsplit`
//! followed by one tab-separated row per session. `audio` is either a WAV
//! path or `feat:<path>` for precomputed features. Relative paths resolve
//! against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "session\tdomain\taudio\tlabels\tsplit";
pub const FEATURE_PREFIX: &str = "feat:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Heldout,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Heldout => "heldout",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "heldout" => Ok(Split::Heldout),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{}'", other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AudioSource {
    Wav(PathBuf),
    Features(PathBuf),
}

impl AudioSource {
    pub fn path(&self) -> &Path {
        match self {
            AudioSource::Wav(p) | AudioSource::Features(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionManifest {
    pub session_id: String,
    pub domain: String,
    pub audio: AudioSource,
    pub labels: PathBuf,
    pub split: Split,
}

fn resolve(base: &Path, field: &str) -> PathBuf {
    let p = PathBuf::from(field);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Parses manifest text. Paths are resolved against `base` but not checked.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<SessionManifest>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        None => return Ok(out),
        Some((_, h)) if h.trim_end_matches('\r') == MANIFEST_HEADER => {}
        Some((i, h)) => {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected header '{}', found '{}'", MANIFEST_HEADER.escape_default(), h),
            })
        }
    }
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 5 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty field".into(),
            });
        }
        let split = fields[4].parse::<Split>().map_err(|msg| Error::Parse { line: line_no, msg })?;
        let session_id = fields[0].to_string();
        if !seen.insert(session_id.clone()) {
            return Err(Error::Validation(format!("duplicate session id '{}'", session_id)));
        }
        let audio = match fields[2].strip_prefix(FEATURE_PREFIX) {
            Some(p) => AudioSource::Features(resolve(base, p)),
            None => AudioSource::Wav(resolve(base, fields[2])),
        };
        out.push(SessionManifest {
            session_id,
            domain: fields[1].to_string(),
            audio,
            labels: resolve(base, fields[3]),
            split,
        });
    }
    Ok(out)
}

/// Reads and validates a manifest; every referenced file must exist.
pub fn load_manifest(path: &Path) -> Result<Vec<SessionManifest>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let entries = parse_manifest(&text, base)?;
    for e in &entries {
        for p in [e.audio.path(), e.labels.as_path()] {
            if !p.is_file() {
                return Err(Error::Validation(format!(
                    "session '{}' references missing file {}",
                    e.session_id,
                    p.display()
                )));
            }
        }
    }
    Ok(entries)
}

fn relative<'a>(p: &'a Path, base: &Path) -> &'a Path {
    p.strip_prefix(base).unwrap_or(p)
}

pub fn manifest_text(entries: &[SessionManifest], base: &Path) -> String {
    let mut s = String::from(MANIFEST_HEADER);
    s.push('\n');
    for e in entries {
        let audio = match &e.audio {
            AudioSource::Wav(p) => relative(p, base).display().to_string(),
            AudioSource::Features(p) => format!("{}{}", FEATURE_PREFIX, relative(p, base).display()),
        };
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            e.session_id,
            e.domain,
            audio,
            relative(&e.labels, base).display(),
            e.split
        )
        .unwrap();
    }
    s
}

/// Writes entries with paths made relative to the manifest's directory where possible.
pub fn write_manifest(path: &Path, entries: &[SessionManifest]) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::write(path, manifest_text(entries, base)).map_err(|e| Error::io(path, e))
}
