use super::objectives::{domain_backward, speaker_backward, DomainObjective};
use super::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::label::{Domain, Speaker};
use crate::layers::{Mode, Params};
use crate::model::{ModelBundle, Variant};
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Speaker-labeled windows with their domain tags.
#[derive(Debug, Clone)]
pub struct LabeledBatch<T> {
    pub windows: Tensor<T>,
    pub labels: Vec<Speaker>,
    pub domains: Vec<Domain>,
}

/// Labeled source windows and unlabeled target windows. Domain labels are
/// implied by membership.
#[derive(Debug, Clone)]
pub struct DomainBatch<T> {
    pub source: Tensor<T>,
    pub source_labels: Vec<Speaker>,
    pub target: Tensor<T>,
}

fn concat<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape()[1..] != b.shape()[1..] {
        return Err(Error::dim(format!("cannot stack {:?} with {:?}", a.shape(), b.shape())));
    }
    let mut shape = a.shape().to_vec();
    shape[0] += b.shape()[0];
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::new(&shape, data)
}

impl<T: Scalar> DomainBatch<T> {
    pub fn new(source: Tensor<T>, source_labels: Vec<Speaker>, target: Tensor<T>) -> Result<Self> {
        if source.rank() != 3 || target.rank() != 3 || source.shape()[0] != source_labels.len() {
            return Err(Error::Alignment(format!(
                "source {:?} with {} labels, target {:?}",
                source.shape(),
                source_labels.len(),
                target.shape()
            )));
        }
        Ok(Self {
            source,
            source_labels,
            target,
        })
    }

    pub fn source_len(&self) -> usize {
        self.source.shape()[0]
    }

    pub fn target_len(&self) -> usize {
        self.target.shape()[0]
    }

    pub fn task_batch(&self) -> LabeledBatch<T> {
        LabeledBatch {
            windows: self.source.clone(),
            labels: self.source_labels.clone(),
            domains: vec![Domain::Source; self.source_len()],
        }
    }

    /// Source rows followed by target rows, with true domain tags.
    pub fn domain_windows(&self) -> Result<(Tensor<T>, Vec<Domain>)> {
        let mut domains = vec![Domain::Source; self.source_len()];
        domains.extend(std::iter::repeat_n(Domain::Target, self.target_len()));
        Ok((concat(&self.source, &self.target)?, domains))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Task,
    Discriminator,
    Adversarial,
}

/// Owns a bundle and one Adam state per network.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub bundle: ModelBundle<T>,
    adam_generator: AdamState<T>,
    adam_classifier: AdamState<T>,
    adam_discriminator: AdamState<T>,
    /// Mode of the generator while the discriminator step extracts embeddings.
    pub step2_generator_mode: Mode,
    target_labels_permitted: bool,
    last_step: Option<StepKind>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(bundle: ModelBundle<T>, adam: AdamConfig) -> Self {
        Self {
            bundle,
            adam_generator: AdamState::new(adam),
            adam_classifier: AdamState::new(adam),
            adam_discriminator: AdamState::new(adam),
            step2_generator_mode: Mode::Train,
            target_labels_permitted: false,
            last_step: None,
        }
    }

    /// Allows target-domain samples in `step_task`. Only upper-bound training does this.
    pub fn permit_target_labels(mut self) -> Self {
        self.target_labels_permitted = true;
        self
    }

    pub fn into_bundle(self) -> ModelBundle<T> {
        self.bundle
    }

    pub fn last_step(&self) -> Option<StepKind> {
        self.last_step
    }

    fn set_train(&mut self) {
        self.bundle.set_mode(Mode::Train);
        self.bundle.generator.set_update_running(true);
        self.bundle.classifier.set_update_running(true);
        self.bundle.discriminator.set_update_running(true);
    }

    /// One Adam update of G and C on speaker cross-entropy.
    pub fn step_task(&mut self, batch: &LabeledBatch<T>, rng: &mut RngState) -> Result<T> {
        if !self.target_labels_permitted && batch.domains.contains(&Domain::Target) {
            return Err(Error::Contract("speaker step received target-domain samples".into()));
        }
        if batch.domains.len() != batch.labels.len() {
            return Err(Error::Alignment(format!(
                "{} domain tags for {} labels",
                batch.domains.len(),
                batch.labels.len()
            )));
        }
        self.set_train();
        let loss = speaker_backward(&mut self.bundle, &batch.windows, &batch.labels, rng)?;
        self.adam_generator.step(self.bundle.generator.params_mut())?;
        self.adam_classifier.step(self.bundle.classifier.params_mut())?;
        self.last_step = Some(StepKind::Task);
        Ok(loss)
    }

    /// One Adam update of D on true-label domain cross-entropy. G and C are
    /// left bitwise unchanged, including batch-norm running statistics.
    pub fn step_discriminator(&mut self, batch: &DomainBatch<T>, rng: &mut RngState) -> Result<T> {
        if batch.source_len() == 0 || batch.target_len() == 0 {
            return Err(Error::Contract("discriminator step needs both domains in the batch".into()));
        }
        self.set_train();
        self.bundle.generator.set_mode(self.step2_generator_mode);
        self.bundle.generator.set_update_running(false);
        let (windows, domains) = batch.domain_windows()?;
        let result = domain_backward(&mut self.bundle, &windows, &domains, DomainObjective::TrueLabels, false, rng);
        self.bundle.generator.set_update_running(true);
        let loss = result?;
        self.adam_discriminator.step(self.bundle.discriminator.params_mut())?;
        self.last_step = Some(StepKind::Discriminator);
        Ok(loss)
    }

    /// One Adam update of G against the frozen discriminator. GAN uses
    /// swapped domain labels, GR backpropagates the true-label loss through
    /// the reversal layer. Returns the loss the generator's gradient came from.
    pub fn step_generator_adversarial(&mut self, batch: &DomainBatch<T>, rng: &mut RngState) -> Result<T> {
        let objective = match self.bundle.config.variant {
            Variant::Gan => DomainObjective::InvertedLabels,
            Variant::Gr => DomainObjective::Reversed,
            other => {
                return Err(Error::config(format!("variant '{}' has no adversarial step", other)));
            }
        };
        if self.last_step != Some(StepKind::Discriminator) {
            return Err(Error::Contract(
                "adversarial generator step must follow a discriminator step".into(),
            ));
        }
        if batch.source_len() == 0 || batch.target_len() == 0 {
            return Err(Error::Contract("adversarial step needs both domains in the batch".into()));
        }
        self.set_train();
        self.bundle.discriminator.set_update_running(false);
        let (windows, domains) = batch.domain_windows()?;
        let result = domain_backward(&mut self.bundle, &windows, &domains, objective, true, rng);
        self.bundle.discriminator.set_update_running(true);
        let loss = result?;
        self.bundle.discriminator.zero_grads();
        self.adam_generator.step(self.bundle.generator.params_mut())?;
        self.last_step = Some(StepKind::Adversarial);
        Ok(loss)
    }
}
