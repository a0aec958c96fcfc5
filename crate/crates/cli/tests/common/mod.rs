#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spkadapt::data::{ExperimentSpec, SyntheticSpec};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spkadapt"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{:?} failed with {:?}\n{}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// A corpus small enough for a few-second pipeline run.
pub fn small_corpus_spec() -> SyntheticSpec {
    SyntheticSpec {
        sessions_per_domain: 4,
        frames_per_session: 240,
        ..SyntheticSpec::default()
    }
}

pub fn small_experiment() -> ExperimentSpec {
    let mut e = ExperimentSpec::new("source", "target");
    e.train.max_epochs = 3;
    e.train.patience = 2;
    e.train.batch_size = 8;
    e.train.heldout_fraction = 0.25;
    e.model.hidden = 8;
    e
}

/// Writes the small corpus and experiment spec under `dir` and returns
/// (manifest, experiment spec) paths.
pub fn small_setup(dir: &Path) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus");
    let synth = dir.join("synthetic.toml");
    std::fs::write(&synth, small_corpus_spec().to_toml_string()).unwrap();
    run_ok(&["synth", "--spec", p(&synth), "--seed", "3", "--out", p(&corpus)]);
    let exp = dir.join("experiment.toml");
    std::fs::write(&exp, small_experiment().to_toml_string()).unwrap();
    (corpus.join("manifest.tsv"), exp)
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {}", path.display(), e))
}
