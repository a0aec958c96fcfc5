//! Experiment specs as TOML files:
//!
//! ```toml
//! source = ["kids"]
//! target = ["teens"]
//! variant = "gr"
//!
//! [train]
//! batch_size = 64
//! seed = 7
//!
//! [model]
//! hidden = 64
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Domain;
use crate::layers::Mode;
use crate::model::{ModelConfig, Variant, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use crate::train::{AdamConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lambda: f64,
    pub seed: u64,
    pub heldout_fraction: f64,
    /// `"train"` or `"eval"`.
    pub step2_generator_mode: String,
    pub learning_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            lambda: t.lambda,
            seed: t.seed,
            heldout_fraction: t.heldout_fraction,
            step2_generator_mode: "train".into(),
            learning_rate: t.adam.lr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            dropout: DEFAULT_DROPOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub source: Vec<String>,
    pub target: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub model: ModelSection,
}

impl ExperimentSpec {
    pub fn new(source: &str, target: &str) -> Self {
        Self {
            source: vec![source.to_string()],
            target: vec![target.to_string()],
            variant: None,
            out: None,
            train: TrainSection::default(),
            model: ModelSection::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::config(format!("experiment spec: {}", e)))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_empty() || self.target.is_empty() {
            return Err(Error::config("experiment needs at least one source and one target domain tag"));
        }
        if self.source.iter().chain(&self.target).any(|t| t.is_empty()) {
            return Err(Error::config("domain tags must be non-empty"));
        }
        let s: BTreeSet<&String> = self.source.iter().collect();
        if let Some(shared) = self.target.iter().find(|t| s.contains(t)) {
            return Err(Error::config(format!("domain tag '{}' is both source and target", shared)));
        }
        self.generator_mode()?;
        self.train_config()?.validate()?;
        self.model_config().validate()
    }

    fn generator_mode(&self) -> Result<Mode> {
        match self.train.step2_generator_mode.as_str() {
            "train" => Ok(Mode::Train),
            "eval" => Ok(Mode::Eval),
            other => Err(Error::config(format!("step2_generator_mode must be 'train' or 'eval', got '{}'", other))),
        }
    }

    pub fn domain_of(&self, tag: &str) -> Option<Domain> {
        if self.source.iter().any(|t| t == tag) {
            Some(Domain::Source)
        } else if self.target.iter().any(|t| t == tag) {
            Some(Domain::Target)
        } else {
            None
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        Ok(TrainConfig {
            variant: self.variant.unwrap_or(Variant::PretrainOnly),
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            lambda: t.lambda,
            seed: t.seed,
            heldout_fraction: t.heldout_fraction,
            adam: AdamConfig {
                lr: t.learning_rate,
                ..AdamConfig::default()
            },
            step2_generator_mode: self.generator_mode()?,
        })
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.model.hidden,
            dropout: self.model.dropout,
            lambda: self.train.lambda,
            variant: self.variant.unwrap_or(Variant::PretrainOnly),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_defaults() {
        let s = ExperimentSpec::from_toml_str("source = [\"a\"]\ntarget = [\"b\", \"c\"]\nvariant = \"gr\"\n[train]\nseed = 7\n").unwrap();
        assert_eq!(s.variant, Some(Variant::Gr));
        assert_eq!(s.train.seed, 7);
        assert_eq!(s.train.batch_size, 64);
        assert_eq!(s.model.hidden, 64);
        assert_eq!(s.domain_of("c"), Some(Domain::Target));
        assert_eq!(s.domain_of("z"), None);
        assert_eq!(ExperimentSpec::from_toml_str(&s.to_toml_string()).unwrap(), s);
    }

    #[test]
    fn overlapping_tags_rejected() {
        let err = ExperimentSpec::from_toml_str("source = [\"a\"]\ntarget = [\"a\"]\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_training_values_rejected() {
        for extra in ["[train]\nbatch_size = 1\n", "[train]\npatience = 0\n", "[train]\nstep2_generator_mode = \"x\"\n", "bogus = 1\n"] {
            let text = format!("source = [\"a\"]\ntarget = [\"b\"]\n{}", extra);
            assert!(matches!(ExperimentSpec::from_toml_str(&text), Err(Error::Config(_))), "{}", extra);
        }
    }
}
