use std::path::{Path, PathBuf};

use spkadapt::data::{load_manifest, Split};
use spkadapt::features::{read_segments, write_segments};
use spkadapt::{RngState, Speaker};

use crate::common::{p, read, run, small_setup};
use crate::Outcome;

fn call(args: &[&str]) -> Result<(), String> {
    let out = run(args);
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn exp_args<'a>(cmd: &'a str, manifest: &'a Path, spec: &'a Path, out: &'a Path) -> Vec<&'a str> {
    vec![cmd, "--manifest", p(manifest), "--spec", p(spec), "--out", p(out), "--seed", "7"]
}

/// synth → pretrain → adapt (GAN, GR) → upperbound → evaluate → fuse.
fn pipeline(dir: &Path) -> Result<PathBuf, String> {
    let corpus = dir.join("corpus");
    let synth = dir.join("synthetic.toml");
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(&synth, crate::common::small_corpus_spec().to_toml_string()).unwrap();
    call(&["synth", "--spec", p(&synth), "--seed", "5", "--out", p(&corpus)])?;
    let spec = dir.join("experiment.toml");
    std::fs::write(&spec, crate::common::small_experiment().to_toml_string()).unwrap();
    let manifest = corpus.join("manifest.tsv");
    let out = dir.join("run");
    call(&exp_args("pretrain", &manifest, &spec, &out))?;
    for v in ["gan", "gr"] {
        let mut a = exp_args("adapt", &manifest, &spec, &out);
        a.extend(["--variant", v]);
        call(&a)?;
        let ckpt = out.join(format!("{}.ckpt", v));
        let mut e = exp_args("evaluate", &manifest, &spec, &out);
        e.extend(["--checkpoint", p(&ckpt)]);
        call(&e)?;
    }
    call(&exp_args("upperbound", &manifest, &spec, &out))?;
    call(&exp_args("fuse", &manifest, &spec, &out))?;
    let fused = out.join("score_fusion.predictions.tsv");
    let mut e = exp_args("evaluate", &manifest, &spec, &out);
    e.extend(["--predictions", p(&fused)]);
    call(&e)?;
    Ok(out)
}

const COMPARED: [&str; 14] = [
    "pretrain.history.tsv",
    "gan.history.tsv",
    "gr.history.tsv",
    "upperbound.history.tsv",
    "gan.report.txt",
    "gan.report.kv",
    "gr.report.txt",
    "gr.report.kv",
    "score_fusion.report.kv",
    "score_fusion.predictions.tsv",
    "embedding_fusion.predictions.tsv",
    "pretrain.ckpt",
    "gan.ckpt",
    "gr.ckpt",
];

pub fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs: Result<Vec<PathBuf>, String> = ["first", "second"].iter().map(|d| pipeline(&dir.path().join(d))).collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, e),
    };
    let differing: Vec<&str> = COMPARED
        .iter()
        .copied()
        .filter(|f| read(&runs[0].join(f)) != read(&runs[1].join(f)))
        .collect();
    Outcome::new(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} history, report and checkpoint files identical across two full pipeline runs", COMPARED.len())
        } else {
            format!("files differ: {}", differing.join(", "))
        },
    )
}

/// Shuffles the speaker of every segment across all target sessions, then
/// flips every speaker, so no target segment is guaranteed to keep its label.
fn permute_target_labels(manifest: &Path) -> usize {
    let mut rng = RngState::new(99);
    let targets: Vec<_> = load_manifest(manifest)
        .unwrap()
        .into_iter()
        .filter(|e| e.domain == "target")
        .collect();
    let mut all: Vec<_> = targets.iter().map(|e| read_segments(&e.labels).unwrap()).collect();
    let mut speakers: Vec<_> = all.iter().flatten().map(|s| s.speaker).collect();
    rng.shuffle(&mut speakers);
    let mut it = speakers.into_iter();
    let mut changed = 0;
    for (entry, segs) in targets.iter().zip(&mut all) {
        for s in segs.iter_mut() {
            let new = it.next().unwrap().map(|x| match x {
                Speaker::Child => Speaker::Adult,
                Speaker::Adult => Speaker::Child,
            });
            changed += usize::from(new != s.speaker);
            s.speaker = new;
        }
        write_segments(&entry.labels, segs).unwrap();
    }
    assert!(targets.iter().any(|e| e.split == Split::Test) && targets.iter().any(|e| e.split != Split::Test));
    changed
}

fn adapt_both(manifest: &Path, spec: &Path, out: &Path) -> Result<(), String> {
    call(&exp_args("pretrain", manifest, spec, out))?;
    for v in ["gan", "gr"] {
        let mut a = exp_args("adapt", manifest, spec, out);
        a.extend(["--variant", v]);
        call(&a)?;
    }
    Ok(())
}

pub fn firewall() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (orig_dir, perm_dir) = (dir.path().join("original"), dir.path().join("permuted"));
    for d in [&orig_dir, &perm_dir] {
        std::fs::create_dir_all(d).unwrap();
    }
    let (original, spec) = small_setup(&orig_dir);
    let (permuted, _) = small_setup(&perm_dir);
    let changed = permute_target_labels(&permuted);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    if let Err(e) = adapt_both(&original, &spec, &a).and_then(|_| adapt_both(&permuted, &spec, &b)) {
        return Outcome::new(false, e);
    }
    let differing: Vec<&str> = ["gan.ckpt", "gr.ckpt", "gan.history.tsv", "gr.history.tsv"]
        .into_iter()
        .filter(|f| read(&a.join(f)) != read(&b.join(f)))
        .collect();
    Outcome::new(
        differing.is_empty() && changed > 0,
        if differing.is_empty() {
            format!("{} target segments relabeled; adapted checkpoints bitwise identical", changed)
        } else {
            format!("{} target segments relabeled; differing: {}", changed, differing.join(", "))
        },
    )
}
