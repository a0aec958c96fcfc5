//! Generator G, speaker classifier C and domain discriminator D.
//!
//! ```text
//! window (31×23) → BLSTM(H) → 128 → 64 → 16 → 16 = embedding
//! embedding → 16 → 16 → 2   speaker logits  (C)
//! embedding → [reversal] → 16 → 2   domain logits (D, training only)
//! ```

mod checkpoint;
mod network;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub(crate) use network::copy_state;
pub use network::{snapshot, Generator, HiddenBlock, Mlp};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{stack_windows, SpliceSample, FEATURE_DIM, WINDOW};
use crate::layers::{softmax, Blstm, GradReversal, Mode};
use crate::rng::RngState;
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

pub const GENERATOR_WIDTHS: [usize; 4] = [128, 64, 16, 16];
pub const CLASSIFIER_WIDTHS: [usize; 2] = [16, 16];
pub const DISCRIMINATOR_WIDTHS: [usize; 1] = [16];
pub const EMBEDDING_DIM: usize = 16;
pub const NUM_CLASSES: usize = 2;
pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_DROPOUT: f64 = 0.2;

/// Training regime a model was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PretrainOnly,
    Gan,
    Gr,
    UpperBound,
}

impl Variant {
    pub fn tag(self) -> u8 {
        match self {
            Variant::PretrainOnly => 0,
            Variant::Gan => 1,
            Variant::Gr => 2,
            Variant::UpperBound => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Variant::PretrainOnly),
            1 => Some(Variant::Gan),
            2 => Some(Variant::Gr),
            3 => Some(Variant::UpperBound),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::PretrainOnly => "pretrain",
            Variant::Gan => "gan",
            Variant::Gr => "gr",
            Variant::UpperBound => "upperbound",
        }
    }

    pub fn is_adversarial(self) -> bool {
        matches!(self, Variant::Gan | Variant::Gr)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" | "pretrain_only" => Ok(Variant::PretrainOnly),
            "gan" => Ok(Variant::Gan),
            "gr" => Ok(Variant::Gr),
            "upperbound" | "upper_bound" => Ok(Variant::UpperBound),
            other => Err(Error::config(format!("unknown variant '{}'", other))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// BLSTM hidden size per direction.
    pub hidden: usize,
    pub dropout: f64,
    /// Gradient reversal coefficient, used by the GR variant only.
    pub lambda: f64,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            dropout: DEFAULT_DROPOUT,
            lambda: 1.0,
            variant: Variant::PretrainOnly,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::config("BLSTM hidden size must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::config(format!("lambda {} must be finite and non-negative", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ModelBundle<T> {
    pub config: ModelConfig,
    pub generator: Generator<T>,
    pub classifier: Mlp<T>,
    pub discriminator: Mlp<T>,
    pub reversal: GradReversal<T>,
    mode: Mode,
}

/// Which network of the bundle a caller refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Net {
    Generator,
    Classifier,
    Discriminator,
}

impl<T: Scalar> ModelBundle<T> {
    /// Glorot-initialized hidden layers, zero-initialized logit heads.
    pub fn new(config: ModelConfig, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        let generator = Generator {
            blstm: Blstm::new(FEATURE_DIM, config.hidden, rng)?,
            mlp: Mlp::new(2 * config.hidden, &GENERATOR_WIDTHS, None, config.dropout, rng)?,
        };
        let classifier = Mlp::new(EMBEDDING_DIM, &CLASSIFIER_WIDTHS, Some(NUM_CLASSES), config.dropout, rng)?;
        let discriminator = Mlp::new(EMBEDDING_DIM, &DISCRIMINATOR_WIDTHS, Some(NUM_CLASSES), config.dropout, rng)?;
        Ok(Self {
            reversal: GradReversal::new(lit(config.lambda))?,
            config,
            generator,
            classifier,
            discriminator,
            mode: Mode::Train,
        })
    }

    /// Every weight and bias zero; batch-norm scales at one.
    pub fn zeroed(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            reversal: GradReversal::new(lit(config.lambda))?,
            generator: Generator {
                blstm: Blstm::zeros(FEATURE_DIM, config.hidden),
                mlp: Mlp::zeros(2 * config.hidden, &GENERATOR_WIDTHS, None, config.dropout)?,
            },
            classifier: Mlp::zeros(EMBEDDING_DIM, &CLASSIFIER_WIDTHS, Some(NUM_CLASSES), config.dropout)?,
            discriminator: Mlp::zeros(EMBEDDING_DIM, &DISCRIMINATOR_WIDTHS, Some(NUM_CLASSES), config.dropout)?,
            config,
            mode: Mode::Train,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.generator.set_mode(mode);
        self.classifier.set_mode(mode);
        self.discriminator.set_mode(mode);
    }

    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        self.reversal = GradReversal::new(lit(lambda))?;
        self.config.lambda = lambda;
        Ok(())
    }

    pub fn embedding_dim(&self) -> usize {
        self.generator.mlp.output_dim()
    }

    fn check_windows(windows: &Tensor<T>) -> Result<()> {
        if windows.rank() != 3 || windows.shape()[1..] != [WINDOW, FEATURE_DIM] || windows.shape()[0] == 0 {
            return Err(Error::dim(format!(
                "expected a non-empty n×{}×{} window batch, got {:?}",
                WINDOW,
                FEATURE_DIM,
                windows.shape()
            )));
        }
        Ok(())
    }

    /// Generator + classifier in the bundle's current mode.
    /// Returns speaker posteriors (`n×2`, child first) and embeddings (`n×16`).
    pub fn forward_speaker(&mut self, windows: &Tensor<T>, rng: &mut RngState) -> Result<(Tensor<T>, Tensor<T>)> {
        Self::check_windows(windows)?;
        let emb = self.generator.forward(windows, rng)?;
        let logits = self.classifier.forward(&emb, rng)?;
        Ok((softmax(&logits)?, emb))
    }

    /// Generator + discriminator in the bundle's current mode.
    /// Returns domain posteriors (`n×2`, source first).
    pub fn forward_domain(&mut self, windows: &Tensor<T>, rng: &mut RngState) -> Result<Tensor<T>> {
        Self::check_windows(windows)?;
        let emb = self.generator.forward(windows, rng)?;
        let emb = self.reversal.forward(&emb);
        let logits = self.discriminator.forward(&emb, rng)?;
        softmax(&logits)
    }

    /// Eval-mode test-time path: generator and classifier only. The
    /// discriminator is never touched.
    pub fn infer_speaker(&self, windows: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        Self::check_windows(windows)?;
        let emb = self.generator.infer(windows)?;
        let logits = self.classifier.infer(&emb)?;
        Ok((softmax(&logits)?, emb))
    }

    pub fn infer_domain(&self, windows: &Tensor<T>) -> Result<Tensor<T>> {
        Self::check_windows(windows)?;
        let emb = self.generator.infer(windows)?;
        softmax(&self.discriminator.infer(&emb)?)
    }

    pub fn infer_embeddings(&self, windows: &Tensor<T>) -> Result<Tensor<T>> {
        Self::check_windows(windows)?;
        self.generator.infer(windows)
    }

    pub fn infer_speaker_samples(&self, samples: &[SpliceSample<T>]) -> Result<(Tensor<T>, Tensor<T>)> {
        self.infer_speaker(&stack_windows(samples)?)
    }

    pub fn state(&self, net: Net) -> Vec<&Tensor<T>> {
        match net {
            Net::Generator => self.generator.state(),
            Net::Classifier => self.classifier.state(),
            Net::Discriminator => self.discriminator.state(),
        }
    }

    pub fn snapshot(&self, net: Net) -> Vec<Vec<T>> {
        snapshot(self.state(net))
    }

    /// All state tensors in checkpoint order: G, C, D.
    pub(crate) fn all_state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut s = self.generator.state_mut();
        s.extend(self.classifier.state_mut());
        s.extend(self.discriminator.state_mut());
        s
    }

    pub(crate) fn all_state(&self) -> Vec<&Tensor<T>> {
        let mut s = self.generator.state();
        s.extend(self.classifier.state());
        s.extend(self.discriminator.state());
        s
    }
}
