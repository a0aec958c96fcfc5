use log::{debug, info};

use super::history::{EpochRecord, History};
use super::steps::{DomainBatch, LabeledBatch, StepKind, Trainer};
use super::{TrainConfig, STREAM_ADAPT, STREAM_INIT, STREAM_SUPERVISED};
use crate::error::{Error, Result};
use crate::features::{stack_windows, SpliceSample, FEATURE_DIM, WINDOW};
use crate::label::Speaker;
use crate::layers::softmax_xent_indices;
use crate::model::{ModelBundle, ModelConfig, Variant};
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const EVAL_CHUNK: usize = 256;

/// Target-domain windows for adaptation. Only the windows are kept; speaker
/// labels never enter the pool.
#[derive(Debug, Clone, Default)]
pub struct TargetPool<T> {
    windows: Vec<Tensor<T>>,
}

impl<T: Scalar> TargetPool<T> {
    pub fn from_samples(samples: &[SpliceSample<T>]) -> Self {
        Self {
            windows: samples.iter().map(|s| s.window.clone()).collect(),
        }
    }

    pub fn from_windows(windows: Vec<Tensor<T>>) -> Result<Self> {
        if let Some(w) = windows.iter().find(|w| w.shape() != [WINDOW, FEATURE_DIM]) {
            return Err(Error::dim(format!("target window has shape {:?}", w.shape())));
        }
        Ok(Self { windows })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    fn stack(&self, idx: &[usize]) -> Result<Tensor<T>> {
        let mut data = Vec::with_capacity(idx.len() * WINDOW * FEATURE_DIM);
        for &i in idx {
            data.extend_from_slice(self.windows[i].data());
        }
        Tensor::new(&[idx.len(), WINDOW, FEATURE_DIM], data)
    }
}

/// Progress notifications from `adapt_observed`, delivered with the bundle
/// as it stands after the event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    EpochStart(usize),
    Step(StepKind),
}

fn labels_of<T>(samples: &[SpliceSample<T>]) -> Result<Vec<Speaker>> {
    samples
        .iter()
        .map(|s| {
            s.speaker.ok_or_else(|| {
                Error::Label(format!("sample at frame {} of session {} has no speaker label", s.center, s.session_id))
            })
        })
        .collect()
}

fn labeled_batch<T: Scalar>(samples: &[SpliceSample<T>], labels: &[Speaker], idx: &[usize]) -> Result<LabeledBatch<T>> {
    Ok(LabeledBatch {
        windows: stack_windows(idx.iter().map(|&i| &samples[i]))?,
        labels: idx.iter().map(|&i| labels[i]).collect(),
        domains: idx.iter().map(|&i| samples[i].domain).collect(),
    })
}

/// Shuffled mini-batches; a trailing batch smaller than 2 is dropped.
fn epoch_batches(n: usize, batch_size: usize, rng: &mut RngState) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(|c| c.to_vec())
        .collect()
}

/// Eval-mode accuracy and mean cross-entropy of the speaker path.
/// Argmax ties go to child.
pub fn heldout_metrics<T: Scalar>(bundle: &ModelBundle<T>, samples: &[SpliceSample<T>]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("held-out set is empty".into()));
    }
    let labels = labels_of(samples)?;
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for (chunk, chunk_labels) in samples.chunks(EVAL_CHUNK).zip(labels.chunks(EVAL_CHUNK)) {
        let emb = bundle.generator.infer(&stack_windows(chunk)?)?;
        let logits = bundle.classifier.infer(&emb)?;
        let idx: Vec<usize> = chunk_labels.iter().map(|s| s.index()).collect();
        let (loss, _) = softmax_xent_indices(&logits, &idx)?;
        loss_sum += loss.to_f64_lossless() * chunk.len() as f64;
        for (row, &c) in logits.data().chunks_exact(2).zip(&idx) {
            let predicted = if row[0] >= row[1] { 0 } else { 1 };
            correct += usize::from(predicted == c);
        }
    }
    let n = samples.len() as f64;
    Ok((correct as f64 / n, loss_sum / n))
}

/// Keeps the bundle with the highest held-out accuracy, breaking exact ties
/// by lower held-out loss.
struct EarlyStopping<T> {
    patience: usize,
    best: Option<(f64, f64, usize, ModelBundle<T>)>,
    stale: usize,
    min_loss: f64,
}

impl<T: Scalar> EarlyStopping<T> {
    fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            stale: 0,
            min_loss: f64::INFINITY,
        }
    }

    /// Records an epoch; returns true when training should stop.
    fn observe(&mut self, epoch: usize, acc: f64, loss: f64, bundle: &ModelBundle<T>) -> bool {
        self.min_loss = self.min_loss.min(loss);
        let improved = match &self.best {
            None => true,
            Some((best_acc, best_loss, _, _)) => acc > *best_acc || (acc == *best_acc && loss < *best_loss),
        };
        if improved {
            self.best = Some((acc, loss, epoch, bundle.clone()));
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

fn record(epoch: usize, sums: [f64; 3], batches: usize, acc: f64, loss: f64, min_loss: f64) -> EpochRecord {
    let mean = |s: f64| if batches == 0 { 0.0 } else { s / batches as f64 };
    EpochRecord {
        epoch,
        task_loss: mean(sums[0]),
        domain_loss: mean(sums[1]),
        adversarial_loss: mean(sums[2]),
        heldout_accuracy: acc,
        heldout_loss: loss,
        best_heldout_loss: min_loss,
    }
}

fn supervised<T: Scalar>(
    model: ModelConfig,
    config: &TrainConfig,
    train: &[SpliceSample<T>],
    heldout: &[SpliceSample<T>],
    permit_target: bool,
) -> Result<(ModelBundle<T>, History)> {
    config.validate()?;
    if heldout.is_empty() {
        return Err(Error::config("held-out split holds no samples"));
    }
    if train.len() < 2 {
        return Err(Error::config(format!("{} training samples; need at least 2", train.len())));
    }
    let labels = labels_of(train)?;
    labels_of(heldout)?;
    let bundle = ModelBundle::new(model, &mut RngState::with_stream(config.seed, STREAM_INIT))?;
    let mut trainer = Trainer::new(bundle, config.adam);
    if permit_target {
        trainer = trainer.permit_target_labels();
    }
    let mut rng = RngState::with_stream(config.seed, STREAM_SUPERVISED);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = History::default();
    for epoch in 1..=config.max_epochs {
        let batches = epoch_batches(train.len(), config.batch_size, &mut rng);
        let mut task = 0.0;
        for idx in &batches {
            let batch = labeled_batch(train, &labels, idx)?;
            task += trainer.step_task(&batch, &mut rng)?.to_f64_lossless();
        }
        let (acc, loss) = heldout_metrics(&trainer.bundle, heldout)?;
        let stop = stopper.observe(epoch, acc, loss, &trainer.bundle);
        history
            .records
            .push(record(epoch, [task, 0.0, 0.0], batches.len(), acc, loss, stopper.min_loss));
        debug!("{} epoch {}: task {:.4} heldout acc {:.4}", model.variant, epoch, task / batches.len().max(1) as f64, acc);
        if stop {
            break;
        }
    }
    match stopper.best {
        Some((acc, _, epoch, bundle)) => {
            info!("{}: kept epoch {} (held-out accuracy {:.4})", model.variant, epoch, acc);
            history.best_epoch = Some(epoch);
            Ok((bundle, history))
        }
        None => Ok((trainer.into_bundle(), history)),
    }
}

/// Supervised training of G and C on labeled source samples.
pub fn pretrain<T: Scalar>(
    model: ModelConfig,
    config: &TrainConfig,
    source_train: &[SpliceSample<T>],
    heldout: &[SpliceSample<T>],
) -> Result<(ModelBundle<T>, History)> {
    let model = ModelConfig {
        variant: Variant::PretrainOnly,
        ..model
    };
    supervised(model, config, source_train, heldout, false)
}

/// Pre-training on source and labeled target samples together.
pub fn train_upper_bound<T: Scalar>(
    model: ModelConfig,
    config: &TrainConfig,
    source_train: &[SpliceSample<T>],
    heldout: &[SpliceSample<T>],
    target_labeled: &[SpliceSample<T>],
) -> Result<(ModelBundle<T>, History)> {
    let model = ModelConfig {
        variant: Variant::UpperBound,
        ..model
    };
    let union: Vec<SpliceSample<T>> = source_train.iter().chain(target_labeled).cloned().collect();
    supervised(model, config, &union, heldout, true)
}

/// Adversarial adaptation of a pre-trained bundle.
pub fn adapt<T: Scalar>(
    pretrained: &ModelBundle<T>,
    config: &TrainConfig,
    source_train: &[SpliceSample<T>],
    heldout: &[SpliceSample<T>],
    target: &TargetPool<T>,
) -> Result<(ModelBundle<T>, History)> {
    adapt_observed(pretrained, config, source_train, heldout, target, &mut |_, _| {})
}

/// `adapt` with a callback after every epoch start and every step.
///
/// Each source batch is paired with the same number of target windows, drawn
/// from a shuffled cycle over the pool. The returned bundle is the best
/// adapted epoch; the pre-trained starting point is not a candidate.
pub fn adapt_observed<T: Scalar>(
    pretrained: &ModelBundle<T>,
    config: &TrainConfig,
    source_train: &[SpliceSample<T>],
    heldout: &[SpliceSample<T>],
    target: &TargetPool<T>,
    observer: &mut dyn FnMut(StepEvent, &ModelBundle<T>),
) -> Result<(ModelBundle<T>, History)> {
    config.validate()?;
    if !config.variant.is_adversarial() {
        return Err(Error::config(format!("'{}' is not an adversarial variant", config.variant)));
    }
    if pretrained.config.variant != Variant::PretrainOnly {
        return Err(Error::config(format!(
            "adaptation starts from a pre-trained model, got a '{}' model",
            pretrained.config.variant
        )));
    }
    if target.is_empty() {
        return Err(Error::config("target set is empty"));
    }
    if heldout.is_empty() {
        return Err(Error::config("held-out split holds no samples"));
    }
    if source_train.len() < 2 {
        return Err(Error::config(format!("{} source samples; need at least 2", source_train.len())));
    }
    let labels = labels_of(source_train)?;
    labels_of(heldout)?;

    let mut bundle = pretrained.clone();
    bundle.config.variant = config.variant;
    bundle.set_lambda(config.lambda)?;
    let mut trainer = Trainer::new(bundle, config.adam);
    trainer.step2_generator_mode = config.step2_generator_mode;

    let mut rng = RngState::with_stream(config.seed, STREAM_ADAPT);
    let mut target_order: Vec<usize> = (0..target.len()).collect();
    rng.shuffle(&mut target_order);
    let mut cursor = 0;

    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = History::default();
    for epoch in 1..=config.max_epochs {
        observer(StepEvent::EpochStart(epoch), &trainer.bundle);
        let batches = epoch_batches(source_train.len(), config.batch_size, &mut rng);
        let mut sums = [0.0; 3];
        for idx in &batches {
            let mut t_idx = Vec::with_capacity(idx.len());
            while t_idx.len() < idx.len() {
                if cursor == target_order.len() {
                    rng.shuffle(&mut target_order);
                    cursor = 0;
                }
                t_idx.push(target_order[cursor]);
                cursor += 1;
            }
            let task = labeled_batch(source_train, &labels, idx)?;
            let batch = DomainBatch::new(task.windows.clone(), task.labels.clone(), target.stack(&t_idx)?)?;

            sums[0] += trainer.step_task(&task, &mut rng)?.to_f64_lossless();
            observer(StepEvent::Step(StepKind::Task), &trainer.bundle);
            sums[1] += trainer.step_discriminator(&batch, &mut rng)?.to_f64_lossless();
            observer(StepEvent::Step(StepKind::Discriminator), &trainer.bundle);
            sums[2] += trainer.step_generator_adversarial(&batch, &mut rng)?.to_f64_lossless();
            observer(StepEvent::Step(StepKind::Adversarial), &trainer.bundle);
        }
        let (acc, loss) = heldout_metrics(&trainer.bundle, heldout)?;
        let stop = stopper.observe(epoch, acc, loss, &trainer.bundle);
        let rec = record(epoch, sums, batches.len(), acc, loss, stopper.min_loss);
        debug!(
            "{} epoch {}: task {:.4} domain {:.4} adversarial {:.4} heldout acc {:.4}",
            config.variant, epoch, rec.task_loss, rec.domain_loss, rec.adversarial_loss, acc
        );
        history.records.push(rec);
        if stop {
            break;
        }
    }
    match stopper.best {
        Some((acc, _, epoch, bundle)) => {
            info!("{}: kept epoch {} (held-out accuracy {:.4})", config.variant, epoch, acc);
            history.best_epoch = Some(epoch);
            Ok((bundle, history))
        }
        None => Ok((trainer.into_bundle(), history)),
    }
}

/// Pre-training followed by adversarial adaptation. Returns the adapted
/// bundle and the two phase histories.
pub fn train_adversarial<T: Scalar>(
    model: ModelConfig,
    config: &TrainConfig,
    source_train: &[SpliceSample<T>],
    heldout: &[SpliceSample<T>],
    target: &TargetPool<T>,
) -> Result<(ModelBundle<T>, History, History)> {
    if target.is_empty() {
        return Err(Error::config("target set is empty"));
    }
    let (pre, pre_history) = pretrain(model, config, source_train, heldout)?;
    let (adapted, history) = adapt(&pre, config, source_train, heldout, target)?;
    Ok((adapted, pre_history, history))
}
