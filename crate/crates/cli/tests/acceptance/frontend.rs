use spkadapt::features::{cmvn_session, mfcc, splice_unlabeled, AudioBuffer, FeatureMatrix, FEATURE_DIM, WINDOW};
use spkadapt::{Domain, RngState, Tensor};

use crate::Outcome;

/// One second of a voiced-like test signal: a few harmonics plus noise.
fn test_audio(rng: &mut RngState) -> AudioBuffer<f64> {
    let rate = 16_000u32;
    let samples = (0..rate as usize)
        .map(|i| {
            let t = i as f64 / rate as f64;
            let tone: f64 = (1..6)
                .map(|h| (2.0 * std::f64::consts::PI * 180.0 * h as f64 * t).sin() / h as f64)
                .sum();
            0.3 * tone + 0.05 * rng.normal::<f64>()
        })
        .collect();
    AudioBuffer::new(samples, rate).unwrap()
}

/// Worst deviation of per-column (mean, population variance) from (0, 1),
/// computed with a two-pass sum independent of the library's helper.
fn cmvn_deviation(f: &FeatureMatrix<f64>) -> f64 {
    let n = f.num_frames();
    let d = f.frames.shape()[1];
    let mut worst = 0.0f64;
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| f.frames.get2(i, j)).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        worst = worst.max(mean.abs()).max((var - 1.0).abs());
    }
    worst
}

pub fn criterion() -> Outcome {
    let mut rng = RngState::new(6);
    let mut failures = Vec::new();

    let feats = mfcc(&test_audio(&mut rng), "one-second").unwrap();
    let shape = feats.frames.shape().to_vec();
    if shape != [49, FEATURE_DIM] {
        failures.push(format!("1 s of 16 kHz audio gave {:?}", shape));
    }

    let normalized = cmvn_session(&feats).unwrap();
    let deviation = cmvn_deviation(&normalized);
    if deviation >= 1e-9 {
        failures.push(format!("CMVN stats off by {:.2e}", deviation));
    }

    let data: Vec<f64> = (0..100 * FEATURE_DIM).map(|_| rng.normal()).collect();
    let session = FeatureMatrix::new("hundred", Tensor::new(&[100, FEATURE_DIM], data).unwrap()).unwrap();
    let samples = splice_unlabeled(&session, Domain::Source);
    let centers: Vec<usize> = samples.iter().map(|s| s.center).collect();
    if centers != [15, 30, 45, 60, 75] {
        failures.push(format!("100-frame session spliced at {:?}", centers));
    }
    for s in &samples {
        let expected = &session.frames.data()[(s.center - 15) * FEATURE_DIM..(s.center + 16) * FEATURE_DIM];
        if s.window.shape() != [WINDOW, FEATURE_DIM] || s.window.data() != expected {
            failures.push(format!("window at {} does not hold frames {}..={}", s.center, s.center - 15, s.center + 15));
        }
    }

    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "features {:?}, CMVN deviation {:.1e}, splice centres {:?}",
                shape, deviation, centers
            )
        } else {
            failures.join("; ")
        },
    )
}
