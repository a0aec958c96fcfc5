//! Corpus manifests, experiment specs, session splits and synthetic corpora.

mod corpus;
mod experiment;
mod manifest;
mod synthetic;

pub use corpus::{
    load_raw_features, load_session, synthetic_sessions, write_synthetic_corpus, LabelAudit, LabelRead, Session,
    TARGET_TEST_FRACTION,
};
pub use experiment::{ExperimentSpec, ModelSection, TrainSection};
pub use manifest::{
    load_manifest, manifest_text, parse_manifest, write_manifest, AudioSource, SessionManifest, Split, FEATURE_PREFIX,
    MANIFEST_HEADER,
};
pub use synthetic::{
    make_synthetic_corpus, make_waveform_corpus, session_name, speaker_turns, DomainParams, SyntheticSession,
    SyntheticSpec, WaveformSession, WaveformSpec,
};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::rng::RngState;

/// RNG stream for session-level held-out splits.
pub const STREAM_SPLIT: u64 = 4;

/// Chooses `round(fraction·n)` held-out sessions, at least one and at most
/// `n − 1`. Returns the held-out ids.
pub fn heldout_sessions(ids: &[String], heldout_fraction: f64, seed: u64) -> Result<BTreeSet<String>> {
    let unique: BTreeSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::Validation("session ids passed to the split are not unique".into()));
    }
    if ids.len() < 2 {
        return Err(Error::config(format!("need at least 2 sessions to split, got {}", ids.len())));
    }
    if !(heldout_fraction > 0.0 && heldout_fraction < 1.0) {
        return Err(Error::config(format!("held-out fraction {} outside (0, 1)", heldout_fraction)));
    }
    let n = ids.len();
    let k = ((heldout_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    RngState::with_stream(seed, STREAM_SPLIT).shuffle(&mut order);
    Ok(order[..k].iter().map(|&i| ids[i].clone()).collect())
}

/// Session-level random split into (train, heldout).
pub fn split_by_session(
    manifests: &[SessionManifest],
    heldout_fraction: f64,
    seed: u64,
) -> Result<(Vec<SessionManifest>, Vec<SessionManifest>)> {
    let ids: Vec<String> = manifests.iter().map(|m| m.session_id.clone()).collect();
    let held = heldout_sessions(&ids, heldout_fraction, seed)?;
    Ok(manifests.iter().cloned().partition(|m| !held.contains(&m.session_id)))
}
