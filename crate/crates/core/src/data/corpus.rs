//! Loading sessions from manifests, with an audit of every label file read.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::manifest::{write_manifest, AudioSource, SessionManifest, Split};
use super::synthetic::SyntheticSession;
use crate::error::{Error, Result};
use crate::features::{
    cmvn_session, frame_labels, mfcc, read_feature_matrix, read_segments, read_wav, splice, splice_unlabeled,
    write_feature_matrix, write_segments, FeatureMatrix, SpliceSample,
};
use crate::label::{Domain, Speaker};
use crate::scalar::Scalar;

/// Fraction of target sessions a synthetic corpus reserves for testing; the
/// rest form the unlabeled adaptation pool.
pub const TARGET_TEST_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabelRead {
    pub session_id: String,
    pub domain: Domain,
    pub path: PathBuf,
}

/// Thread-safe record of label files opened during a run.
#[derive(Debug, Default)]
pub struct LabelAudit {
    reads: Mutex<Vec<LabelRead>>,
}

impl LabelAudit {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&self, r: LabelRead) {
        self.reads.lock().expect("audit lock").push(r);
    }

    /// Reads in a canonical order.
    pub fn reads(&self) -> Vec<LabelRead> {
        let mut v = self.reads.lock().expect("audit lock").clone();
        v.sort();
        v
    }

    pub fn target_reads(&self) -> usize {
        self.reads().iter().filter(|r| r.domain == Domain::Target).count()
    }

    pub fn to_text(&self) -> String {
        self.reads()
            .iter()
            .map(|r| format!("{}\t{}\t{}\n", r.session_id, r.domain, r.path.display()))
            .collect()
    }
}

/// Raw (pre-CMVN) features of a manifest entry, named after the session.
pub fn load_raw_features<T: Scalar>(entry: &SessionManifest) -> Result<FeatureMatrix<T>> {
    let mut f = match &entry.audio {
        AudioSource::Features(p) => read_feature_matrix(p)?,
        AudioSource::Wav(p) => mfcc(&read_wav(p)?, &entry.session_id)?,
    };
    f.session_id = entry.session_id.clone();
    Ok(f)
}

/// A session ready for splicing: CMVN-normalized features and, when
/// requested, frame labels.
#[derive(Debug, Clone)]
pub struct Session<T> {
    pub session_id: String,
    pub domain: Domain,
    pub split: Split,
    pub features: FeatureMatrix<T>,
    pub labels: Option<Vec<Option<Speaker>>>,
}

impl<T: Scalar> Session<T> {
    pub fn labeled_samples(&self) -> Result<Vec<SpliceSample<T>>> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("session '{}' was loaded without labels", self.session_id)))?;
        splice(&self.features, labels, self.domain)
    }

    pub fn unlabeled_samples(&self) -> Vec<SpliceSample<T>> {
        splice_unlabeled(&self.features, self.domain)
    }
}

/// Loads features, applies per-session CMVN and, only if `with_labels` is
/// set, reads the segment file (recording the read in `audit`).
pub fn load_session<T: Scalar>(entry: &SessionManifest, domain: Domain, with_labels: bool, audit: &LabelAudit) -> Result<Session<T>> {
    let raw = load_raw_features::<T>(entry)?;
    let features = cmvn_session(&raw)?;
    let labels = if with_labels {
        audit.record(LabelRead {
            session_id: entry.session_id.clone(),
            domain,
            path: entry.labels.clone(),
        });
        let segs = read_segments(&entry.labels)?;
        Some(frame_labels(&segs, features.num_frames(), |i| features.frame_center_sec(i)))
    } else {
        None
    };
    Ok(Session {
        session_id: entry.session_id.clone(),
        domain,
        split: entry.split,
        features,
        labels,
    })
}

/// In-memory equivalent of writing and reloading a synthetic corpus.
pub fn synthetic_sessions(corpus: &[SyntheticSession]) -> Result<Vec<Session<f64>>> {
    let split = split_plan(corpus);
    corpus
        .iter()
        .zip(split)
        .map(|(s, split)| {
            Ok(Session {
                session_id: s.session_id().to_string(),
                domain: s.domain,
                split,
                features: cmvn_session(&s.features)?,
                labels: Some(s.labels.iter().map(|&l| Some(l)).collect()),
            })
        })
        .collect()
}

/// Source sessions go to `train`; the last `TARGET_TEST_FRACTION` of each
/// domain's target sessions go to `test`, the rest to `train`.
fn split_plan(corpus: &[SyntheticSession]) -> Vec<Split> {
    let n_target = corpus.iter().filter(|s| s.domain == Domain::Target).count();
    let n_test = (n_target as f64 * TARGET_TEST_FRACTION).round() as usize;
    let mut seen_target = 0;
    corpus
        .iter()
        .map(|s| match s.domain {
            Domain::Source => Split::Train,
            Domain::Target => {
                seen_target += 1;
                if seen_target > n_target - n_test {
                    Split::Test
                } else {
                    Split::Train
                }
            }
        })
        .collect()
}

/// Writes features, segment files and `manifest.tsv` under `dir`. Domain tags
/// are `source` and `target`.
pub fn write_synthetic_corpus(corpus: &[SyntheticSession], dir: &Path) -> Result<Vec<SessionManifest>> {
    let feat_dir = dir.join("features");
    let label_dir = dir.join("labels");
    for d in [&feat_dir, &label_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut entries = Vec::with_capacity(corpus.len());
    for (s, split) in corpus.iter().zip(split_plan(corpus)) {
        let id = s.session_id();
        let feat = feat_dir.join(format!("{}.dtns", id));
        let labels = label_dir.join(format!("{}.tsv", id));
        write_feature_matrix(&feat, &s.features)?;
        write_segments(&labels, &s.segments())?;
        entries.push(SessionManifest {
            session_id: id.to_string(),
            domain: s.domain.as_str().to_string(),
            audio: AudioSource::Features(feat),
            labels,
            split,
        });
    }
    write_manifest(&dir.join("manifest.tsv"), &entries)?;
    Ok(entries)
}
