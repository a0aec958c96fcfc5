//! End-to-end comparison on a synthetic corpus: pre-training, GAN and GR
//! adaptation, the upper bound, and both fusions, all scored on held-back
//! target sessions.

use std::time::Instant;

use log::info;

use crate::data::{heldout_sessions, make_synthetic_corpus, synthetic_sessions, Session, Split, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{embed_fuse_train, mean_f1, predict, score_fuse, EmbeddingSet, FusionConfig, PredictionSet};
use crate::features::SpliceSample;
use crate::label::{Domain, Speaker};
use crate::model::{ModelBundle, ModelConfig, Variant};
use crate::scalar::Scalar;
use crate::train::{adapt, heldout_metrics, pretrain, train_upper_bound, TargetPool, TrainConfig};

/// Samples of one experiment, grouped by role.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub source_train: Vec<SpliceSample<f64>>,
    pub source_heldout: Vec<SpliceSample<f64>>,
    /// Unlabeled windows of the target training sessions.
    pub target_pool: TargetPool<f64>,
    /// Labeled windows of the target training sessions, for the upper bound only.
    pub target_train: Vec<SpliceSample<f64>>,
    pub target_test: Vec<SpliceSample<f64>>,
}

/// Ids of the source sessions used for early stopping: those marked
/// `heldout`, or a seeded session-level draw from the `train` ones.
pub fn source_heldout_ids<T>(sessions: &[Session<T>], heldout_fraction: f64, seed: u64) -> Result<Vec<String>> {
    let source: Vec<&Session<T>> = sessions.iter().filter(|s| s.domain == Domain::Source).collect();
    let marked: Vec<String> = source
        .iter()
        .filter(|s| s.split == Split::Heldout)
        .map(|s| s.session_id.clone())
        .collect();
    if !marked.is_empty() {
        return Ok(marked);
    }
    let ids: Vec<String> = source
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| s.session_id.clone())
        .collect();
    Ok(heldout_sessions(&ids, heldout_fraction, seed)?.into_iter().collect())
}

/// Labeled source windows split into (training, held-out); test sessions are skipped.
pub fn source_samples<T: Scalar>(sessions: &[Session<T>], heldout_fraction: f64, seed: u64) -> Result<(Vec<SpliceSample<T>>, Vec<SpliceSample<T>>)> {
    let held = source_heldout_ids(sessions, heldout_fraction, seed)?;
    let (mut train, mut heldout) = (Vec::new(), Vec::new());
    for s in sessions.iter().filter(|s| s.domain == Domain::Source && s.split != Split::Test) {
        if held.contains(&s.session_id) {
            heldout.extend(s.labeled_samples()?);
        } else {
            train.extend(s.labeled_samples()?);
        }
    }
    Ok((train, heldout))
}

impl ExperimentData {
    /// Source sessions marked `train` are split by session into training and
    /// held-out parts unless some are already marked `heldout`.
    pub fn from_sessions(sessions: &[Session<f64>], heldout_fraction: f64, seed: u64) -> Result<Self> {
        let held = source_heldout_ids(sessions, heldout_fraction, seed)?;
        let mut data = Self {
            source_train: Vec::new(),
            source_heldout: Vec::new(),
            target_pool: TargetPool::default(),
            target_train: Vec::new(),
            target_test: Vec::new(),
        };
        let mut pool = Vec::new();
        for s in sessions {
            match (s.domain, s.split) {
                (Domain::Source, Split::Test) => {}
                (Domain::Source, _) if held.contains(&s.session_id) => data.source_heldout.extend(s.labeled_samples()?),
                (Domain::Source, _) => data.source_train.extend(s.labeled_samples()?),
                (Domain::Target, Split::Test) => data.target_test.extend(s.labeled_samples()?),
                (Domain::Target, _) => {
                    pool.extend(s.unlabeled_samples());
                    data.target_train.extend(s.labeled_samples()?);
                }
            }
        }
        data.target_pool = TargetPool::from_samples(&pool);
        if data.target_test.is_empty() {
            return Err(Error::config("no target test sessions"));
        }
        Ok(data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub seed: u64,
    /// Mean F1 on the target test sessions.
    pub pretrain: f64,
    pub gan: f64,
    pub gr: f64,
    pub upper_bound: f64,
    pub score_fusion: f64,
    pub embedding_fusion: f64,
    /// Held-out source accuracy of the pre-trained model.
    pub source_heldout_accuracy: f64,
    pub seconds: f64,
}

fn target_f1(bundle: &ModelBundle<f64>, test: &[SpliceSample<f64>]) -> Result<(PredictionSet<f64>, f64)> {
    let p = predict(bundle, test)?;
    let f = mean_f1(&p)?.mean_f1;
    Ok((p, f))
}

/// Trains every variant on one corpus and scores it on the target test sessions.
pub fn run_experiment(data: &ExperimentData, model: ModelConfig, config: &TrainConfig) -> Result<BenchmarkResult> {
    let start = Instant::now();
    let (pre, _) = pretrain(model, config, &data.source_train, &data.source_heldout)?;
    let (source_heldout_accuracy, _) = heldout_metrics(&pre, &data.source_heldout)?;
    let (_, pretrain_f1) = target_f1(&pre, &data.target_test)?;

    let mut adapted = Vec::new();
    for variant in [Variant::Gan, Variant::Gr] {
        let cfg = TrainConfig {
            variant,
            ..config.clone()
        };
        let (bundle, _) = adapt(&pre, &cfg, &data.source_train, &data.source_heldout, &data.target_pool)?;
        adapted.push(bundle);
    }
    let (p_gan, gan) = target_f1(&adapted[0], &data.target_test)?;
    let (p_gr, gr) = target_f1(&adapted[1], &data.target_test)?;
    let score_fusion = mean_f1(&score_fuse(&p_gan, &p_gr)?)?.mean_f1;

    let source_labels: Vec<Speaker> = data.source_train.iter().filter_map(|s| s.speaker).collect();
    let e_gan = EmbeddingSet::compute(&adapted[0], &data.source_train)?;
    let e_gr = EmbeddingSet::compute(&adapted[1], &data.source_train)?;
    let fusion_cfg = FusionConfig {
        seed: config.seed,
        batch_size: config.batch_size,
        ..FusionConfig::default()
    };
    let fusion = embed_fuse_train(&e_gan.embeddings, &e_gr.embeddings, &source_labels, &fusion_cfg)?;
    let t_gan = EmbeddingSet::compute(&adapted[0], &data.target_test)?;
    let t_gr = EmbeddingSet::compute(&adapted[1], &data.target_test)?;
    let fused = PredictionSet::from_posteriors(&fusion.posteriors(&t_gan.embeddings, &t_gr.embeddings)?, &data.target_test)?;
    let embedding_fusion = mean_f1(&fused)?.mean_f1;

    let (ub, _) = train_upper_bound(model, config, &data.source_train, &data.source_heldout, &data.target_train)?;
    let (_, upper_bound) = target_f1(&ub, &data.target_test)?;

    let result = BenchmarkResult {
        seed: config.seed,
        pretrain: pretrain_f1,
        gan,
        gr,
        upper_bound,
        score_fusion,
        embedding_fusion,
        source_heldout_accuracy,
        seconds: start.elapsed().as_secs_f64(),
    };
    info!("{:?}", result);
    Ok(result)
}

/// Generates the corpus for `spec` and runs every variant with `config.seed`.
pub fn run_synthetic(spec: &SyntheticSpec, model: ModelConfig, config: &TrainConfig) -> Result<BenchmarkResult> {
    let corpus = make_synthetic_corpus(spec)?;
    let sessions = synthetic_sessions(&corpus)?;
    let data = ExperimentData::from_sessions(&sessions, config.heldout_fraction, config.seed)?;
    run_experiment(&data, model, config)
}
