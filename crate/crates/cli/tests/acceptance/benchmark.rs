use std::sync::OnceLock;

use spkadapt::benchmark::{run_synthetic, BenchmarkResult};
use spkadapt::data::SyntheticSpec;
use spkadapt::layers::Mode;
use spkadapt::model::ModelConfig;
use spkadapt::train::TrainConfig;

use crate::Outcome;

const SEEDS: u64 = 5;
/// Required gain of each adapted variant over pre-training, in F1 points.
const MIN_GAIN: f64 = 5.0;
/// Allowed shortfall of score fusion below the weaker adapted variant.
const FUSION_SLACK: f64 = 0.5;

/// Reduced training budget that keeps five seeds inside the time limit.
fn config(seed: u64) -> (ModelConfig, TrainConfig) {
    let model = ModelConfig {
        hidden: 16,
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        batch_size: 16,
        max_epochs: 40,
        patience: 5,
        seed,
        step2_generator_mode: Mode::Eval,
        ..TrainConfig::default()
    };
    (model, train)
}

fn results() -> &'static Result<Vec<BenchmarkResult>, String> {
    static RESULTS: OnceLock<Result<Vec<BenchmarkResult>, String>> = OnceLock::new();
    RESULTS.get_or_init(|| {
        let spec = SyntheticSpec::default();
        (0..SEEDS)
            .map(|seed| {
                let (model, train) = config(seed);
                let corpus = SyntheticSpec { seed, ..spec.clone() };
                run_synthetic(&corpus, model, &train).map_err(|e| e.to_string())
            })
            .collect()
    })
}

fn points(x: f64) -> f64 {
    100.0 * x
}

fn mean(rs: &[BenchmarkResult], f: impl Fn(&BenchmarkResult) -> f64) -> f64 {
    rs.iter().map(f).sum::<f64>() / rs.len() as f64
}

pub fn adaptation_benefit() -> Outcome {
    let rs = match results() {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.clone()),
    };
    let pre = points(mean(rs, |r| r.pretrain));
    let gan = points(mean(rs, |r| r.gan));
    let gr = points(mean(rs, |r| r.gr));
    let ub = points(mean(rs, |r| r.upper_bound));
    let passed = gan - pre >= MIN_GAIN && gr - pre >= MIN_GAIN && ub >= gan && ub >= gr;
    Outcome::new(
        passed,
        format!(
            "mean target F1 over {} seeds: pretrain {:.2}, GAN {:.2} ({:+.2}), GR {:.2} ({:+.2}), upper bound {:.2}",
            SEEDS,
            pre,
            gan,
            gan - pre,
            gr,
            gr - pre,
            ub
        ),
    )
}

pub fn fusion_sanity() -> Outcome {
    let rs = match results() {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e.clone()),
    };
    let margins: Vec<f64> = rs
        .iter()
        .map(|r| points(r.score_fusion) - points(r.gan.min(r.gr)))
        .collect();
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome::new(
        worst >= -FUSION_SLACK,
        format!(
            "score fusion minus min(GAN, GR) per seed: [{}] points",
            margins.iter().map(|m| format!("{:+.2}", m)).collect::<Vec<_>>().join(", ")
        ),
    )
}
