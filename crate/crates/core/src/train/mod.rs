//! Optimizer, the three training steps and the epoch loops built on them.

mod adam;
mod history;
mod objectives;
mod schedule;
mod steps;

pub use adam::{AdamConfig, AdamState};
pub use history::{EpochRecord, History};
pub use objectives::{domain_backward, domain_loss, gradients, speaker_backward, speaker_loss, speaker_indices, DomainObjective};
pub use schedule::{adapt, adapt_observed, heldout_metrics, pretrain, train_adversarial, train_upper_bound, StepEvent, TargetPool};
pub use steps::{DomainBatch, LabeledBatch, StepKind, Trainer};

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::model::Variant;

/// RNG stream used for weight initialization.
pub const STREAM_INIT: u64 = 0;
/// RNG stream for supervised epochs (pre-training and upper bound).
pub const STREAM_SUPERVISED: u64 = 1;
/// RNG stream for adversarial adaptation.
pub const STREAM_ADAPT: u64 = 2;
/// RNG stream for embedding-fusion weight initialization.
pub const STREAM_FUSION: u64 = 3;
/// RNG stream for embedding-fusion training.
pub const STREAM_FUSION_TRAIN: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lambda: f64,
    pub seed: u64,
    pub heldout_fraction: f64,
    pub adam: AdamConfig,
    pub step2_generator_mode: Mode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::PretrainOnly,
            batch_size: 64,
            max_epochs: 100,
            patience: 5,
            lambda: 1.0,
            seed: 0,
            heldout_fraction: 0.2,
            adam: AdamConfig::default(),
            step2_generator_mode: Mode::Train,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::config(format!(
                "batch size must be at least 2 for batch normalization, got {}",
                self.batch_size
            )));
        }
        if self.patience < 1 {
            return Err(Error::config("patience must be at least 1"));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::config(format!("lambda {} must be finite and non-negative", self.lambda)));
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            return Err(Error::config(format!(
                "held-out fraction {} must lie strictly between 0 and 1",
                self.heldout_fraction
            )));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::config(format!("invalid Adam settings {:?}", a)));
        }
        Ok(())
    }
}
