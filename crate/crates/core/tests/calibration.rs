//! Properties of the synthetic corpus measured with real training runs.
//! The two five-seed checks train at the library defaults and take about a
//! quarter of an hour on one core: `cargo test --release --test calibration -- --ignored`.

use spkadapt::benchmark::ExperimentData;
use spkadapt::data::{make_synthetic_corpus, synthetic_sessions, SyntheticSpec};
use spkadapt::eval::{mean_f1, predict};
use spkadapt::features::SpliceSample;
use spkadapt::model::{ModelBundle, ModelConfig};
use spkadapt::train::{pretrain, train_upper_bound, TrainConfig};

const SEEDS: u64 = 5;

fn defaults(seed: u64) -> (ModelConfig, TrainConfig) {
    let train = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    (ModelConfig::default(), train)
}

fn data(spec: &SyntheticSpec, seed: u64, heldout_fraction: f64) -> ExperimentData {
    let corpus = make_synthetic_corpus(&SyntheticSpec { seed, ..spec.clone() }).unwrap();
    ExperimentData::from_sessions(&synthetic_sessions(&corpus).unwrap(), heldout_fraction, seed).unwrap()
}

fn f1(bundle: &ModelBundle<f64>, samples: &[SpliceSample<f64>]) -> f64 {
    mean_f1(&predict(bundle, samples).unwrap()).unwrap().mean_f1
}

fn without_shift() -> SyntheticSpec {
    let spec = SyntheticSpec::default();
    SyntheticSpec {
        target: spec.source.clone(),
        ..spec
    }
}

#[test]
#[ignore = "ten default-size training runs"]
fn zero_shift_upper_bound_matches_pretrain() {
    let spec = without_shift();
    let mut gaps = Vec::new();
    for seed in 0..SEEDS {
        let (model, train) = defaults(seed);
        let d = data(&spec, seed, train.heldout_fraction);
        let (pre, _) = pretrain(model, &train, &d.source_train, &d.source_heldout).unwrap();
        let (ub, _) = train_upper_bound(model, &train, &d.source_train, &d.source_heldout, &d.target_train).unwrap();
        gaps.push(100.0 * (f1(&ub, &d.target_test) - f1(&pre, &d.target_test)));
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    eprintln!("upper bound minus pretrain: mean {:+.2} points, per seed {:?}", mean, gaps);
    assert!(mean.abs() < 2.0, "upper bound minus pretrain per seed {:?} points", gaps);
}

#[test]
#[ignore = "five default-size training runs"]
fn default_shift_degrades_target_only() {
    let spec = SyntheticSpec::default();
    let (mut source, mut target) = (0.0, 0.0);
    for seed in 0..SEEDS {
        let (model, train) = defaults(seed);
        let d = data(&spec, seed, train.heldout_fraction);
        let (pre, _) = pretrain(model, &train, &d.source_train, &d.source_heldout).unwrap();
        source += f1(&pre, &d.source_heldout) / SEEDS as f64;
        target += f1(&pre, &d.target_test) / SEEDS as f64;
    }
    eprintln!("pretrain F1: source held-out {:.4}, target test {:.4}", source, target);
    assert!(source > 0.9, "source held-out F1 {:.4}", source);
    assert!(target < source - 0.1, "target F1 {:.4} against source {:.4}", target, source);
}

#[test]
fn identical_class_means_stay_at_chance() {
    let mut spec = SyntheticSpec::default();
    for p in [&mut spec.source, &mut spec.target] {
        p.child_mean = vec![0.0; p.child_mean.len()];
        p.adult_mean = p.child_mean.clone();
    }
    let model = ModelConfig {
        hidden: 16,
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        batch_size: 16,
        max_epochs: 5,
        ..TrainConfig::default()
    };
    let d = data(&spec, 0, train.heldout_fraction);
    let (pre, _) = pretrain(model, &train, &d.source_train, &d.source_heldout).unwrap();
    let (ub, _) = train_upper_bound(model, &train, &d.source_train, &d.source_heldout, &d.target_train).unwrap();
    for (name, b) in [("pretrain", &pre), ("upper bound", &ub)] {
        let score = f1(b, &d.target_test);
        assert!(score < 0.6, "{} F1 {:.4} on uninformative features", name, score);
    }
}
