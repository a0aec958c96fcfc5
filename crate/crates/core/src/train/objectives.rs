//! Loss evaluation and backpropagation through the bundle for the speaker
//! and domain objectives. Callers choose which parameter gradients to use.

use crate::error::{Error, Result};
use crate::label::{Domain, Speaker};
use crate::layers::{softmax_xent_indices, Params};
use crate::model::ModelBundle;
use crate::rng::RngState;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// How the domain loss is formed and routed back into the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainObjective {
    /// True domain labels, plain backpropagation.
    TrueLabels,
    /// Source and target labels swapped.
    InvertedLabels,
    /// True domain labels with the gradient reversal layer between G and D.
    Reversed,
}

pub fn speaker_indices(labels: &[Speaker]) -> Vec<usize> {
    labels.iter().map(|s| s.index()).collect()
}

fn domain_indices(domains: &[Domain], objective: DomainObjective) -> Vec<usize> {
    domains
        .iter()
        .map(|d| match objective {
            DomainObjective::InvertedLabels => d.flipped().index(),
            _ => d.index(),
        })
        .collect()
}

fn check_count<T: Scalar>(windows: &Tensor<T>, n: usize) -> Result<()> {
    if windows.rank() != 3 || windows.shape()[0] != n {
        return Err(Error::Alignment(format!(
            "{} labels for window batch of shape {:?}",
            n,
            windows.shape()
        )));
    }
    Ok(())
}

/// Speaker cross-entropy through G and C in the bundle's current mode.
pub fn speaker_loss<T: Scalar>(bundle: &mut ModelBundle<T>, windows: &Tensor<T>, labels: &[Speaker], rng: &mut RngState) -> Result<T> {
    check_count(windows, labels.len())?;
    let emb = bundle.generator.forward(windows, rng)?;
    let logits = bundle.classifier.forward(&emb, rng)?;
    Ok(softmax_xent_indices(&logits, &speaker_indices(labels))?.0)
}

/// Speaker cross-entropy with fresh gradients left in every G and C parameter.
pub fn speaker_backward<T: Scalar>(bundle: &mut ModelBundle<T>, windows: &Tensor<T>, labels: &[Speaker], rng: &mut RngState) -> Result<T> {
    check_count(windows, labels.len())?;
    bundle.generator.zero_grads();
    bundle.classifier.zero_grads();
    let emb = bundle.generator.forward(windows, rng)?;
    let logits = bundle.classifier.forward(&emb, rng)?;
    let (loss, dlogits) = softmax_xent_indices(&logits, &speaker_indices(labels))?;
    let demb = bundle.classifier.backward(&dlogits)?;
    bundle.generator.backward(&demb)?;
    Ok(loss)
}

/// Domain cross-entropy through G and D in the bundle's current mode.
pub fn domain_loss<T: Scalar>(
    bundle: &mut ModelBundle<T>,
    windows: &Tensor<T>,
    domains: &[Domain],
    objective: DomainObjective,
    rng: &mut RngState,
) -> Result<T> {
    check_count(windows, domains.len())?;
    let emb = bundle.generator.forward(windows, rng)?;
    let emb = match objective {
        DomainObjective::Reversed => bundle.reversal.forward(&emb),
        _ => emb,
    };
    let logits = bundle.discriminator.forward(&emb, rng)?;
    Ok(softmax_xent_indices(&logits, &domain_indices(domains, objective))?.0)
}

/// Domain cross-entropy with fresh gradients in every D parameter and, when
/// `into_generator` is set, in every G parameter as well.
pub fn domain_backward<T: Scalar>(
    bundle: &mut ModelBundle<T>,
    windows: &Tensor<T>,
    domains: &[Domain],
    objective: DomainObjective,
    into_generator: bool,
    rng: &mut RngState,
) -> Result<T> {
    check_count(windows, domains.len())?;
    bundle.discriminator.zero_grads();
    let emb = bundle.generator.forward(windows, rng)?;
    let reversed = objective == DomainObjective::Reversed;
    let emb = if reversed { bundle.reversal.forward(&emb) } else { emb };
    let logits = bundle.discriminator.forward(&emb, rng)?;
    let (loss, dlogits) = softmax_xent_indices(&logits, &domain_indices(domains, objective))?;
    let demb = bundle.discriminator.backward(&dlogits)?;
    if into_generator {
        let demb = if reversed { bundle.reversal.backward(&demb) } else { demb };
        bundle.generator.zero_grads();
        bundle.generator.backward(&demb)?;
    }
    Ok(loss)
}

/// Copies of the current gradients of a parameter list (zeros where absent).
pub fn gradients<T: Scalar>(params: Vec<&Tensor<T>>) -> Vec<Vec<T>> {
    params
        .into_iter()
        .map(|p| p.grad().map_or_else(|| vec![T::zero(); p.len()], |g| g.to_vec()))
        .collect()
}
