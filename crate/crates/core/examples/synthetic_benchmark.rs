//! Runs the synthetic domain-shift comparison over several seeds.
//!
//! Usage: `synthetic_benchmark [seeds] [hidden] [max_epochs] [patience] [batch_size] [spec.toml|-] [train|eval]`
//!
//! The last argument sets the generator mode during discriminator updates.

use spkadapt::benchmark::run_synthetic;
use spkadapt::data::SyntheticSpec;
use spkadapt::model::ModelConfig;
use spkadapt::train::TrainConfig;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let seeds: u64 = arg(1, 5);
    let model = ModelConfig {
        hidden: arg(2, 16),
        ..ModelConfig::default()
    };
    let mut means = [0.0; 6];
    println!("seed\tpretrain\tgan\tgr\tupper\tscore_fus\temb_fus\tsrc_acc\tsecs");
    for seed in 0..seeds {
        let base = match std::env::args().nth(6).filter(|p| p != "-") {
            Some(path) => SyntheticSpec::load(std::path::Path::new(&path))?,
            None => SyntheticSpec::default(),
        };
        let spec = SyntheticSpec { seed, ..base };
        let cfg = TrainConfig {
            seed,
            max_epochs: arg(3, 30),
            patience: arg(4, 5),
            batch_size: arg(5, 64),
            step2_generator_mode: match std::env::args().nth(7).as_deref() {
                Some("eval") => spkadapt::layers::Mode::Eval,
                _ => spkadapt::layers::Mode::Train,
            },
            ..TrainConfig::default()
        };
        let r = run_synthetic(&spec, model, &cfg)?;
        println!(
            "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.1}",
            seed, r.pretrain, r.gan, r.gr, r.upper_bound, r.score_fusion, r.embedding_fusion, r.source_heldout_accuracy, r.seconds
        );
        for (m, v) in means.iter_mut().zip([r.pretrain, r.gan, r.gr, r.upper_bound, r.score_fusion, r.embedding_fusion]) {
            *m += v / seeds as f64;
        }
    }
    println!(
        "mean\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
        means[0], means[1], means[2], means[3], means[4], means[5]
    );
    Ok(())
}
