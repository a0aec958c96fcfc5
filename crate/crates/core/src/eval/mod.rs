//! Predictions, mean unweighted F1, score and embedding fusion, embedding export.

mod embeddings;
mod fusion;
mod metrics;

pub use embeddings::{export_embeddings, read_embeddings, EmbeddingRecord, EmbeddingSet};
pub use fusion::{embed_fuse_train, load_fusion_model, save_fusion_model, FusionConfig, FusionModel, FUSION_WIDTHS};
pub use metrics::{mean_f1, sig6, ClassScores, F1Report};

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::SpliceSample;
use crate::label::{Domain, Speaker};
use crate::model::ModelBundle;
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

const INFER_CHUNK: usize = 256;
const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    /// Posterior of child, then adult.
    pub posterior: [T; 2],
    pub predicted: Speaker,
    pub truth: Option<Speaker>,
    pub session_id: String,
    pub domain: Domain,
    pub center: usize,
}

/// Argmax over (child, adult); an exact tie goes to child.
pub fn argmax<T: Scalar>(p: [T; 2]) -> Speaker {
    if p[0] >= p[1] {
        Speaker::Child
    } else {
        Speaker::Adult
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet<T> {
    pub entries: Vec<Prediction<T>>,
}

impl<T: Scalar> PredictionSet<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pairs `n×2` posteriors with the samples they were computed from.
    pub fn from_posteriors(posteriors: &Tensor<T>, samples: &[SpliceSample<T>]) -> Result<Self> {
        if posteriors.rank() != 2 || posteriors.shape() != [samples.len(), 2] {
            return Err(Error::Alignment(format!(
                "posteriors {:?} for {} samples",
                posteriors.shape(),
                samples.len()
            )));
        }
        let mut entries = Vec::with_capacity(samples.len());
        for (row, s) in posteriors.data().chunks_exact(2).zip(samples) {
            let p = [row[0], row[1]];
            check_posterior(p)?;
            entries.push(Prediction {
                posterior: p,
                predicted: argmax(p),
                truth: s.speaker,
                session_id: s.session_id.clone(),
                domain: s.domain,
                center: s.center,
            });
        }
        Ok(Self { entries })
    }

    pub fn posteriors(&self) -> Tensor<T> {
        let data = self.entries.iter().flat_map(|e| e.posterior).collect();
        Tensor::new(&[self.len(), 2], data).expect("n×2")
    }

    /// Tab-separated text: `session center domain p_child p_adult predicted truth`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# session\tcenter\tdomain\tp_child\tp_adult\tpredicted\ttruth\n");
        for e in &self.entries {
            writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.session_id,
                e.center,
                e.domain,
                e.posterior[0].to_f64_lossless(),
                e.posterior[1].to_f64_lossless(),
                e.predicted,
                e.truth.map_or("none", |t| t.as_str())
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 7 {
                return Err(err(format!("expected 7 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number '{}'", s)));
            let posterior = [lit::<T>(num(f[3])?), lit::<T>(num(f[4])?)];
            check_posterior(posterior).map_err(|e| err(e.to_string()))?;
            let truth = match f[6] {
                "none" => None,
                t => Some(t.parse::<Speaker>().map_err(|e| err(e.to_string()))?),
            };
            entries.push(Prediction {
                posterior,
                predicted: argmax(posterior),
                truth,
                session_id: f[0].to_string(),
                domain: f[2].parse().map_err(|e: Error| err(e.to_string()))?,
                center: f[1].parse().map_err(|_| err(format!("bad centre '{}'", f[1])))?,
            });
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn check_posterior<T: Scalar>(p: [T; 2]) -> Result<()> {
    let (a, b) = (p[0].to_f64_lossless(), p[1].to_f64_lossless());
    if !(a >= 0.0 && b >= 0.0 && (a + b - 1.0).abs() <= SUM_TOLERANCE) {
        return Err(Error::Validation(format!("posterior ({}, {}) is not a distribution", a, b)));
    }
    Ok(())
}

/// Eval-mode speaker posteriors for every sample.
pub fn predict<T: Scalar>(bundle: &ModelBundle<T>, samples: &[SpliceSample<T>]) -> Result<PredictionSet<T>> {
    let mut entries = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(INFER_CHUNK) {
        let (post, _) = bundle.infer_speaker_samples(chunk)?;
        entries.extend(PredictionSet::from_posteriors(&post, chunk)?.entries);
    }
    Ok(PredictionSet { entries })
}

/// Per-sample mean of two posteriors over the same samples in the same order.
pub fn score_fuse<T: Scalar>(a: &PredictionSet<T>, b: &PredictionSet<T>) -> Result<PredictionSet<T>> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("{} predictions against {}", a.len(), b.len())));
    }
    let half = lit::<T>(0.5);
    let mut entries = Vec::with_capacity(a.len());
    for (i, (x, y)) in a.entries.iter().zip(&b.entries).enumerate() {
        if x.session_id != y.session_id || x.center != y.center || x.domain != y.domain {
            return Err(Error::Alignment(format!(
                "sample {} differs: {}@{} vs {}@{}",
                i, x.session_id, x.center, y.session_id, y.center
            )));
        }
        let p = [(x.posterior[0] + y.posterior[0]) * half, (x.posterior[1] + y.posterior[1]) * half];
        entries.push(Prediction {
            posterior: p,
            predicted: argmax(p),
            ..x.clone()
        });
    }
    Ok(PredictionSet { entries })
}
