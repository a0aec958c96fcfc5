//! Synthetic two-domain corpora with known speaker labels.
//!
//! Feature mode draws 23-dim frame sequences directly: the speaker of the
//! current turn selects a mean, the domain selects the pair of means and the
//! noise scale, and noise follows a stationary AR(1) process. Waveform mode
//! renders harmonic tones for the two speakers at 16 kHz, with a one-pole
//! low-pass coloration on target-domain sessions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{AudioBuffer, FeatureMatrix, Segment, FEATURE_DIM, FRAME_LEN_MS, FRAME_SHIFT_MS};
use crate::label::{Domain, Speaker};
use crate::rng::RngState;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    pub child_mean: Vec<f64>,
    pub adult_mean: Vec<f64>,
    /// Stationary standard deviation of the per-dimension noise.
    pub noise_scale: f64,
}

impl DomainParams {
    fn mean(&self, s: Speaker) -> &[f64] {
        match s {
            Speaker::Child => &self.child_mean,
            Speaker::Adult => &self.adult_mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub source: DomainParams,
    pub target: DomainParams,
    /// AR(1) coefficient of the frame noise, in [0, 1).
    pub smoothing: f64,
    pub sessions_per_domain: usize,
    pub frames_per_session: usize,
    /// Probability that a turn belongs to the child.
    pub child_fraction: f64,
    /// Mean speaker-turn length in frames.
    pub mean_turn_frames: f64,
    pub seed: u64,
}

fn unit(dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; FEATURE_DIM];
    v[dim] = 1.0;
    v
}

fn scaled(v: &[f64], k: f64) -> Vec<f64> {
    v.iter().map(|x| x * k).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl Default for SyntheticSpec {
    /// Dimensions 0 and 1 separate the speakers moderately (±0.7) in both
    /// domains. Dimensions 2 and 3 separate them strongly (±1.5) in the
    /// source domain only, so a source-trained model leans on directions
    /// that carry nothing in the target domain. Frame noise is white.
    fn default() -> Self {
        let stable = add(&scaled(&unit(0), 0.7), &scaled(&unit(1), 0.7));
        let spurious = add(&scaled(&unit(2), 1.5), &scaled(&unit(3), 1.5));
        let source = DomainParams {
            child_mean: add(&stable, &spurious),
            adult_mean: scaled(&add(&stable, &spurious), -1.0),
            noise_scale: 1.0,
        };
        let target = DomainParams {
            child_mean: stable.clone(),
            adult_mean: scaled(&stable, -1.0),
            noise_scale: 1.0,
        };
        Self {
            source,
            target,
            smoothing: 0.0,
            sessions_per_domain: 20,
            frames_per_session: 600,
            child_fraction: 0.4,
            mean_turn_frames: 60.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::config(format!("synthetic spec: {}", e)))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("synthetic spec serializes")
    }

    /// Class means shared by both domains; the target adds `shift` to both
    /// means and multiplies the noise scale by `cov_scale`.
    pub fn shifted(child_mean: Vec<f64>, adult_mean: Vec<f64>, shift: &[f64], cov_scale: f64) -> Self {
        let source = DomainParams {
            child_mean: child_mean.clone(),
            adult_mean: adult_mean.clone(),
            noise_scale: 1.0,
        };
        let target = DomainParams {
            child_mean: add(&child_mean, shift),
            adult_mean: add(&adult_mean, shift),
            noise_scale: cov_scale,
        };
        Self {
            source,
            target,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("source", &self.source), ("target", &self.target)] {
            if d.child_mean.len() != FEATURE_DIM || d.adult_mean.len() != FEATURE_DIM {
                return Err(Error::config(format!("{} means must have {} entries", name, FEATURE_DIM)));
            }
            if !(d.noise_scale > 0.0 && d.noise_scale.is_finite()) {
                return Err(Error::config(format!("{} noise scale must be positive", name)));
            }
            if d.child_mean.iter().chain(&d.adult_mean).any(|v| !v.is_finite()) {
                return Err(Error::config(format!("{} means must be finite", name)));
            }
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::config(format!("smoothing {} outside [0, 1)", self.smoothing)));
        }
        if self.frames_per_session == 0 || self.sessions_per_domain == 0 {
            return Err(Error::config("synthetic corpus needs frames and sessions"));
        }
        if self.frames_per_session < 2 {
            return Err(Error::config("a session needs at least 2 frames to hold both speakers"));
        }
        if !(self.child_fraction > 0.0 && self.child_fraction < 1.0) {
            return Err(Error::config(format!(
                "child fraction {} leaves one class empty",
                self.child_fraction
            )));
        }
        if !(self.mean_turn_frames >= 1.0 && self.mean_turn_frames.is_finite()) {
            return Err(Error::config("mean turn length must be at least one frame"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSession {
    pub domain: Domain,
    /// Raw frames; CMVN and splicing happen downstream.
    pub features: FeatureMatrix<f64>,
    pub labels: Vec<Speaker>,
}

impl SyntheticSession {
    pub fn session_id(&self) -> &str {
        &self.features.session_id
    }

    /// Speaker turns as segments whose boundaries fall halfway between frame centres.
    pub fn segments(&self) -> Vec<Segment> {
        let shift = FRAME_SHIFT_MS as f64 / 1000.0;
        let first_center = FRAME_LEN_MS as f64 / 2000.0;
        let edge = |i: usize| first_center + shift * (i as f64 - 0.5);
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.labels.len() {
            if i == self.labels.len() || self.labels[i] != self.labels[start] {
                out.push(Segment {
                    start_sec: if start == 0 { 0.0 } else { edge(start) },
                    end_sec: edge(i),
                    speaker: Some(self.labels[start]),
                });
                start = i;
            }
        }
        out
    }
}

/// Frame-level speaker turns with geometric-like lengths. Redrawn until both
/// speakers occur.
pub fn speaker_turns(n: usize, child_fraction: f64, mean_turn: f64, rng: &mut RngState) -> Vec<Speaker> {
    loop {
        let mut labels = Vec::with_capacity(n);
        while labels.len() < n {
            let s = if rng.uniform::<f64>() < child_fraction {
                Speaker::Child
            } else {
                Speaker::Adult
            };
            let u: f64 = rng.uniform();
            let len = (-mean_turn * (1.0 - u).ln()).ceil().max(1.0) as usize;
            labels.extend(std::iter::repeat_n(s, len.min(n - labels.len())));
        }
        if labels.contains(&Speaker::Child) && labels.contains(&Speaker::Adult) {
            return labels;
        }
    }
}

pub fn session_name(domain: Domain, index: usize) -> String {
    let prefix = match domain {
        Domain::Source => "src",
        Domain::Target => "tgt",
    };
    format!("{}-{:03}", prefix, index)
}

/// Generates every session; a pure function of `spec`.
pub fn make_synthetic_corpus(spec: &SyntheticSpec) -> Result<Vec<SyntheticSession>> {
    spec.validate()?;
    let mut rng = RngState::new(spec.seed);
    let innovation = (1.0 - spec.smoothing * spec.smoothing).sqrt();
    let mut sessions = Vec::with_capacity(2 * spec.sessions_per_domain);
    for domain in [Domain::Source, Domain::Target] {
        let params = match domain {
            Domain::Source => &spec.source,
            Domain::Target => &spec.target,
        };
        for k in 0..spec.sessions_per_domain {
            let n = spec.frames_per_session;
            let labels = speaker_turns(n, spec.child_fraction, spec.mean_turn_frames, &mut rng);
            let mut noise: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.normal()).collect();
            let mut data = Vec::with_capacity(n * FEATURE_DIM);
            for (t, &s) in labels.iter().enumerate() {
                if t > 0 {
                    for e in noise.iter_mut() {
                        *e = spec.smoothing * *e + innovation * rng.normal::<f64>();
                    }
                }
                let mean = params.mean(s);
                data.extend(mean.iter().zip(&noise).map(|(m, e)| m + params.noise_scale * e));
            }
            let frames = Tensor::new(&[n, FEATURE_DIM], data)?;
            sessions.push(SyntheticSession {
                domain,
                features: FeatureMatrix::new(session_name(domain, k), frames)?,
                labels,
            });
        }
    }
    Ok(sessions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub sessions_per_domain: usize,
    pub seconds_per_session: f64,
    pub sample_rate: u32,
    pub child_f0: f64,
    pub adult_f0: f64,
    /// One-pole low-pass coefficient applied to target-domain audio.
    pub target_coloration: f64,
    pub noise_level: f64,
    pub child_fraction: f64,
    pub mean_turn_sec: f64,
    pub seed: u64,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        Self {
            sessions_per_domain: 2,
            seconds_per_session: 4.0,
            sample_rate: 16_000,
            child_f0: 300.0,
            adult_f0: 120.0,
            target_coloration: 0.8,
            noise_level: 0.01,
            child_fraction: 0.4,
            mean_turn_sec: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSession {
    pub session_id: String,
    pub domain: Domain,
    pub audio: AudioBuffer<f64>,
    pub segments: Vec<Segment>,
}

const HARMONICS: usize = 8;

/// Renders harmonic-tone sessions; a pure function of `spec`.
pub fn make_waveform_corpus(spec: &WaveformSpec) -> Result<Vec<WaveformSession>> {
    if spec.sessions_per_domain == 0 || !(spec.seconds_per_session > 0.0) {
        return Err(Error::config("waveform corpus needs sessions and a positive duration"));
    }
    if !(0.0..1.0).contains(&spec.target_coloration) {
        return Err(Error::config("target coloration must lie in [0, 1)"));
    }
    if !(spec.child_fraction > 0.0 && spec.child_fraction < 1.0) {
        return Err(Error::config("child fraction leaves one class empty"));
    }
    let rate = spec.sample_rate as f64;
    let n = (spec.seconds_per_session * rate).round() as usize;
    // turns are drawn on a 10 ms grid
    let grid = (rate / 100.0).round().max(1.0) as usize;
    let mut rng = RngState::new(spec.seed);
    let mut out = Vec::new();
    for domain in [Domain::Source, Domain::Target] {
        for k in 0..spec.sessions_per_domain {
            let cells = n.div_ceil(grid);
            let turns = speaker_turns(cells, spec.child_fraction, spec.mean_turn_sec * 100.0, &mut rng);
            let mut samples = vec![0.0; n];
            let mut phase = [0.0f64; HARMONICS];
            let mut segments: Vec<Segment> = Vec::new();
            let mut turn_start = 0;
            let mut f0 = 0.0;
            for cell in 0..cells {
                let s = turns[cell];
                if cell == 0 || turns[cell - 1] != s {
                    let base = match s {
                        Speaker::Child => spec.child_f0,
                        Speaker::Adult => spec.adult_f0,
                    };
                    f0 = base * rng.uniform_in(0.9, 1.1);
                    turn_start = cell;
                }
                let end = ((cell + 1) * grid).min(n);
                for sample in &mut samples[cell * grid..end] {
                    let mut v = 0.0;
                    for (h, ph) in phase.iter_mut().enumerate() {
                        let f = f0 * (h + 1) as f64;
                        if f < rate / 2.0 {
                            *ph += 2.0 * std::f64::consts::PI * f / rate;
                            v += ph.sin() / (h + 1) as f64;
                        }
                    }
                    *sample = 0.3 * v + spec.noise_level * rng.normal::<f64>();
                }
                if cell + 1 == cells || turns[cell + 1] != s {
                    segments.push(Segment {
                        start_sec: (turn_start * grid) as f64 / rate,
                        end_sec: end as f64 / rate,
                        speaker: Some(s),
                    });
                }
            }
            if domain == Domain::Target {
                let a = spec.target_coloration;
                let mut y = 0.0;
                for s in samples.iter_mut() {
                    y = (1.0 - a) * *s + a * y;
                    *s = y;
                }
            }
            out.push(WaveformSession {
                session_id: session_name(domain, k),
                domain,
                audio: AudioBuffer::new(samples, spec.sample_rate)?,
                segments,
            });
        }
    }
    Ok(out)
}
