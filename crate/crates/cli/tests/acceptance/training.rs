use spkadapt::benchmark::ExperimentData;
use spkadapt::data::{make_synthetic_corpus, synthetic_sessions, SyntheticSpec};
use spkadapt::features::{FEATURE_DIM, WINDOW};
use spkadapt::layers::{Mode, Params};
use spkadapt::model::{ModelBundle, ModelConfig, Net, Variant};
use spkadapt::train::{
    adapt_observed, domain_backward, gradients, pretrain, AdamConfig, DomainBatch, DomainObjective, StepEvent, StepKind,
    TrainConfig, Trainer,
};
use spkadapt::{RngState, Speaker, Tensor};

use crate::Outcome;

const GR_BATCHES: usize = 100;
const GR_TOLERANCE: f64 = 1e-12;

fn random_batch(n: usize, rng: &mut RngState) -> DomainBatch<f64> {
    let per = WINDOW * FEATURE_DIM;
    let labels: Vec<Speaker> = (0..n).map(|_| Speaker::from_index(rng.index(2)).unwrap()).collect();
    let source: Vec<f64> = labels
        .iter()
        .flat_map(|s| {
            let shift = if *s == Speaker::Child { 0.8 } else { -0.8 };
            (0..per).map(|_| shift + rng.normal::<f64>()).collect::<Vec<_>>()
        })
        .collect();
    let target: Vec<f64> = (0..n * per).map(|_| 0.3 + 1.5 * rng.normal::<f64>()).collect();
    DomainBatch::new(
        Tensor::new(&[n, WINDOW, FEATURE_DIM], source).unwrap(),
        labels,
        Tensor::new(&[n, WINDOW, FEATURE_DIM], target).unwrap(),
    )
    .unwrap()
}

/// Runs GR training over random batches; before each adversarial step the
/// discriminator-loss gradient with respect to G is computed on a copy of
/// the bundle (same mode, same dropout draws) and compared with the
/// generator gradient the reversal step produces.
pub fn reversal_identity() -> Outcome {
    let config = ModelConfig {
        hidden: 8,
        variant: Variant::Gr,
        ..ModelConfig::default()
    };
    let mut rng = RngState::new(2024);
    let bundle = ModelBundle::new(config, &mut RngState::new(1)).unwrap();
    let mut trainer = Trainer::new(bundle, AdamConfig::default());
    let mut worst = 0.0f64;
    let mut smallest_reference = f64::INFINITY;
    for _ in 0..GR_BATCHES {
        let lambda: f64 = rng.uniform_in(0.05, 2.0);
        trainer.bundle.set_lambda(lambda).unwrap();
        let n = 2 + rng.index(7);
        let batch = random_batch(n, &mut rng);
        let mut step_rng = RngState::new(rng.next_u64());
        trainer.step_task(&batch.task_batch(), &mut step_rng).unwrap();
        trainer.step_discriminator(&batch, &mut step_rng).unwrap();

        let mut reference = trainer.bundle.clone();
        reference.set_mode(Mode::Train);
        let (w, d) = batch.domain_windows().unwrap();
        domain_backward(&mut reference, &w, &d, DomainObjective::TrueLabels, true, &mut step_rng.clone()).unwrap();
        let expected = gradients(reference.generator.params());

        trainer.step_generator_adversarial(&batch, &mut step_rng).unwrap();
        let actual = gradients(trainer.bundle.generator.params());
        let mut reference_norm = 0.0f64;
        for (a, e) in actual.iter().flatten().zip(expected.iter().flatten()) {
            worst = worst.max((a + lambda * e).abs());
            reference_norm = reference_norm.max(e.abs());
        }
        smallest_reference = smallest_reference.min(reference_norm);
    }
    // an all-zero reference would make the identity vacuous
    let passed = worst < GR_TOLERANCE && smallest_reference > 0.0;
    Outcome::new(
        passed,
        format!(
            "max |g_GR + λ·g_D| = {:.2e} over {} batches (smallest max|g_D| {:.2e})",
            worst, GR_BATCHES, smallest_reference
        ),
    )
}

fn bits(s: &[Vec<f64>]) -> Vec<Vec<u64>> {
    s.iter().map(|t| t.iter().map(|v| v.to_bits()).collect()).collect()
}

struct Snap {
    g: Vec<Vec<u64>>,
    c: Vec<Vec<u64>>,
    d: Vec<Vec<u64>>,
}

impl Snap {
    fn of(b: &ModelBundle<f64>) -> Self {
        Self {
            g: bits(&b.snapshot(Net::Generator)),
            c: bits(&b.snapshot(Net::Classifier)),
            d: bits(&b.snapshot(Net::Discriminator)),
        }
    }
}

/// Full adaptation runs (both variants) on the default synthetic corpus with
/// every network's parameters and running statistics compared bitwise
/// around each step.
pub fn step_isolation() -> Outcome {
    let spec = SyntheticSpec::default();
    let sessions = synthetic_sessions(&make_synthetic_corpus(&spec).unwrap()).unwrap();
    let base = TrainConfig {
        batch_size: 32,
        max_epochs: 2,
        patience: 2,
        ..TrainConfig::default()
    };
    let data = ExperimentData::from_sessions(&sessions, base.heldout_fraction, base.seed).unwrap();
    let model = ModelConfig {
        hidden: 8,
        ..ModelConfig::default()
    };
    let (pre, _) = pretrain(model, &base, &data.source_train, &data.source_heldout).unwrap();

    let mut violations = Vec::new();
    let mut steps = 0usize;
    for variant in [Variant::Gan, Variant::Gr] {
        let cfg = TrainConfig { variant, ..base.clone() };
        let mut prev: Option<Snap> = None;
        let mut expected_next = StepKind::Task;
        let mut observer = |event: StepEvent, b: &ModelBundle<f64>| {
            let now = Snap::of(b);
            if let (StepEvent::Step(kind), Some(before)) = (event, prev.as_ref()) {
                steps += 1;
                let changed = [now.g != before.g, now.c != before.c, now.d != before.d];
                let allowed = match kind {
                    StepKind::Task => [true, true, false],
                    StepKind::Discriminator => [false, false, true],
                    StepKind::Adversarial => [true, false, false],
                };
                for (net, (&c, &ok)) in ["G", "C", "D"].iter().zip(changed.iter().zip(&allowed)) {
                    if c && !ok {
                        violations.push(format!("{:?} {:?} changed {}", variant, kind, net));
                    }
                }
                // each step must move at least one network it owns
                if !changed.iter().zip(&allowed).any(|(&c, &ok)| c && ok) {
                    violations.push(format!("{:?} {:?} changed nothing", variant, kind));
                }
                if kind != expected_next {
                    violations.push(format!("{:?} expected {:?}, saw {:?}", variant, expected_next, kind));
                }
                expected_next = match kind {
                    StepKind::Task => StepKind::Discriminator,
                    StepKind::Discriminator => StepKind::Adversarial,
                    StepKind::Adversarial => StepKind::Task,
                };
            }
            if let StepEvent::EpochStart(_) = event {
                expected_next = StepKind::Task;
            }
            prev = Some(now);
        };
        adapt_observed(&pre, &cfg, &data.source_train, &data.source_heldout, &data.target_pool, &mut observer).unwrap();
    }
    violations.dedup();
    Outcome::new(
        violations.is_empty() && steps > 0,
        if violations.is_empty() {
            format!("{} steps checked bitwise across GAN and GR adaptation", steps)
        } else {
            format!("{} violations, first: {}", violations.len(), violations[0])
        },
    )
}
