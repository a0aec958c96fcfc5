use spkadapt::eval::{mean_f1, Prediction, PredictionSet};
use spkadapt::{Domain, RngState, Speaker};

use crate::Outcome;

const SETS: usize = 1000;

/// Per-class counts straight from the (truth, predicted) pairs, no matrix.
fn brute_force(pairs: &[(Speaker, Speaker)]) -> f64 {
    let mut total = 0.0;
    for class in [Speaker::Child, Speaker::Adult] {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for &(truth, predicted) in pairs {
            match (truth == class, predicted == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        total += if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
    }
    total / 2.0
}

fn random_pairs(rng: &mut RngState) -> Vec<(Speaker, Speaker)> {
    let n = 1 + rng.index(40);
    // skewed class rates make empty rows and columns common
    let truth_child: f64 = [0.0, 1.0, 0.05, 0.5, rng.uniform()][rng.index(5)];
    let pred_child: f64 = [0.0, 1.0, 0.05, 0.5, rng.uniform()][rng.index(5)];
    (0..n)
        .map(|_| {
            let t = if rng.bernoulli(truth_child) { Speaker::Child } else { Speaker::Adult };
            let p = if rng.bernoulli(pred_child) { Speaker::Child } else { Speaker::Adult };
            (t, p)
        })
        .collect()
}

fn as_set(pairs: &[(Speaker, Speaker)]) -> PredictionSet<f64> {
    let entries = pairs
        .iter()
        .enumerate()
        .map(|(i, &(truth, predicted))| {
            let posterior = if predicted == Speaker::Child { [0.75, 0.25] } else { [0.25, 0.75] };
            Prediction {
                posterior,
                predicted,
                truth: Some(truth),
                session_id: format!("s{}", i % 3),
                domain: Domain::Target,
                center: 15 * (i + 1),
            }
        })
        .collect();
    PredictionSet { entries }
}

pub fn criterion() -> Outcome {
    let mut rng = RngState::new(7);
    let mut mismatches = 0;
    let mut degenerate = 0;
    for _ in 0..SETS {
        let pairs = random_pairs(&mut rng);
        let expected = brute_force(&pairs);
        let actual = mean_f1(&as_set(&pairs)).unwrap().mean_f1;
        if actual.to_bits() != expected.to_bits() {
            mismatches += 1;
        }
        let has = |f: &dyn Fn(&(Speaker, Speaker)) -> bool| pairs.iter().any(f);
        let empty_class = [Speaker::Child, Speaker::Adult]
            .iter()
            .any(|&c| !has(&|p| p.0 == c) || !has(&|p| p.1 == c));
        if empty_class {
            degenerate += 1;
        }
    }
    Outcome::new(
        mismatches == 0 && degenerate > 0,
        format!(
            "{} of {} sets differ from the brute-force count ({} sets had an empty class row or column)",
            mismatches, SETS, degenerate
        ),
    )
}
