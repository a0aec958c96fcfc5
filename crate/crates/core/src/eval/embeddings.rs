//! Embedding export: an `n×16` `DTNS` tensor plus a `.meta` sidecar with one
//! `session center domain label` line per row.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{sidecar_path, SpliceSample};
use crate::label::{Domain, Speaker};
use crate::model::ModelBundle;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingRecord {
    pub session_id: String,
    pub center: usize,
    pub domain: Domain,
    pub label: Option<Speaker>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    pub embeddings: Tensor<T>,
    pub records: Vec<EmbeddingRecord>,
}

impl<T: Scalar> EmbeddingSet<T> {
    /// Eval-mode generator outputs for every sample.
    pub fn compute(bundle: &ModelBundle<T>, samples: &[SpliceSample<T>]) -> Result<Self> {
        let dim = bundle.embedding_dim();
        let mut data = Vec::with_capacity(samples.len() * dim);
        for chunk in samples.chunks(CHUNK) {
            let (_, emb) = bundle.infer_speaker_samples(chunk)?;
            data.extend_from_slice(emb.data());
        }
        let records = samples
            .iter()
            .map(|s| EmbeddingRecord {
                session_id: s.session_id.clone(),
                center: s.center,
                domain: s.domain,
                label: s.speaker,
            })
            .collect();
        Ok(Self {
            embeddings: Tensor::new(&[samples.len(), dim], data)?,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.embeddings
            .write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
        let mut meta = String::from("# session\tcenter\tdomain\tlabel\n");
        for r in &self.records {
            writeln!(meta, "{}\t{}\t{}\t{}", r.session_id, r.center, r.domain, r.label.map_or("none", |l| l.as_str())).unwrap();
        }
        let side = sidecar_path(path);
        std::fs::write(&side, meta).map_err(|e| Error::io(side, e))
    }
}

pub fn export_embeddings<T: Scalar>(bundle: &ModelBundle<T>, samples: &[SpliceSample<T>], path: &Path) -> Result<EmbeddingSet<T>> {
    let set = EmbeddingSet::compute(bundle, samples)?;
    set.write(path)?;
    Ok(set)
}

pub fn read_embeddings<T: Scalar>(path: &Path) -> Result<EmbeddingSet<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let embeddings = Tensor::read_from(&mut BufReader::new(file))?;
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        records.push(EmbeddingRecord {
            session_id: f[0].to_string(),
            center: f[1].parse().map_err(|_| err(format!("bad centre '{}'", f[1])))?,
            domain: f[2].parse().map_err(|e: Error| err(e.to_string()))?,
            label: match f[3] {
                "none" => None,
                l => Some(l.parse().map_err(|e: Error| err(e.to_string()))?),
            },
        });
    }
    if embeddings.rank() != 2 || embeddings.shape()[0] != records.len() {
        return Err(Error::Format(format!(
            "{} embedding rows but {} sidecar records",
            embeddings.shape().first().copied().unwrap_or(0),
            records.len()
        )));
    }
    Ok(EmbeddingSet { embeddings, records })
}
