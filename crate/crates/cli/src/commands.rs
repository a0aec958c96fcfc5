use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use spkadapt::benchmark::source_samples;
use spkadapt::data::{
    load_manifest, load_raw_features, load_session, make_synthetic_corpus, write_manifest, write_synthetic_corpus,
    AudioSource, ExperimentSpec, LabelAudit, Session, SessionManifest, Split, SyntheticSpec,
};
use spkadapt::eval::{
    embed_fuse_train, export_embeddings, mean_f1, predict, save_fusion_model, score_fuse, EmbeddingSet, FusionConfig,
    PredictionSet,
};
use spkadapt::features::{write_feature_matrix, SpliceSample};
use spkadapt::model::{load_checkpoint_expecting, save_checkpoint, ModelBundle, ModelConfig, Variant};
use spkadapt::train::{adapt, pretrain, train_upper_bound, TargetPool, TrainConfig};
use spkadapt::{Domain, Speaker};

use crate::error::{CliError, CliResult};
use crate::{Command, ExperimentArgs};

pub fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Featurize { manifest, out, workers } => featurize(&manifest, &out, workers),
        Command::Synth { spec, seed, out } => synth(spec.as_deref(), seed, &out),
        Command::Pretrain { exp } => run_pretrain(&exp),
        Command::Adapt {
            exp,
            variant,
            checkpoint,
        } => run_adapt(&exp, variant.map(Variant::from), checkpoint),
        Command::Upperbound { exp } => run_upper_bound(&exp),
        Command::Evaluate {
            exp,
            checkpoint,
            predictions,
            name,
        } => evaluate(&exp, checkpoint, predictions, name),
        Command::Fuse { exp, gan, gr } => fuse(&exp, gan, gr),
        Command::ExportEmbeddings {
            manifest,
            checkpoint,
            out,
            name,
        } => export(&manifest, &checkpoint, &out, name),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into())
}

fn featurize(manifest: &Path, out: &Path, workers: usize) -> CliResult<()> {
    if workers == 0 {
        return Err(CliError::Invalid("--workers must be at least 1".into()));
    }
    let entries = load_manifest(manifest)?;
    let feat_dir = out.join("features");
    create_dir(&feat_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start {} workers: {}", workers, e)))?;
    let rewritten: Vec<CliResult<SessionManifest>> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                let path = feat_dir.join(format!("{}.dtns", entry.session_id));
                let features = load_raw_features::<f64>(entry)?;
                write_feature_matrix(&path, &features)?;
                info!("{}: {} frames", entry.session_id, features.num_frames());
                Ok(SessionManifest {
                    audio: AudioSource::Features(path),
                    ..entry.clone()
                })
            })
            .collect()
    });
    let rewritten = rewritten.into_iter().collect::<CliResult<Vec<_>>>()?;
    write_manifest(&out.join("manifest.tsv"), &rewritten)?;
    Ok(())
}

fn synth(spec: Option<&Path>, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut spec = match spec {
        Some(p) => SyntheticSpec::load(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    create_dir(out)?;
    let corpus = make_synthetic_corpus(&spec)?;
    let entries = write_synthetic_corpus(&corpus, out)?;
    write_text(&out.join("synthetic.toml"), &spec.to_toml_string())?;
    let mut experiment = ExperimentSpec::new(Domain::Source.as_str(), Domain::Target.as_str());
    experiment.train.seed = spec.seed;
    write_text(&out.join("experiment.toml"), &experiment.to_toml_string())?;
    info!("wrote {} sessions to {}", entries.len(), out.display());
    Ok(())
}

/// Experiment spec with command-line overrides applied and validated.
fn experiment(exp: &ExperimentArgs, variant: Option<Variant>) -> CliResult<ExperimentSpec> {
    let mut spec = match &exp.spec {
        Some(p) => ExperimentSpec::load(p)?,
        None => ExperimentSpec::new(Domain::Source.as_str(), Domain::Target.as_str()),
    };
    if let Some(s) = exp.seed {
        spec.train.seed = s;
    }
    if let Some(b) = exp.batch_size {
        spec.train.batch_size = b;
    }
    if let Some(l) = exp.lambda {
        spec.train.lambda = l;
    }
    if variant.is_some() {
        spec.variant = variant;
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Load {
    Skip,
    Unlabeled,
    Labeled,
}

/// What a command loads from each group of sessions.
#[derive(Debug, Clone, Copy)]
struct Roles {
    source: Load,
    target_train: Load,
    target_test: Load,
}

fn load_sessions(manifest: &Path, spec: &ExperimentSpec, roles: Roles, audit: &LabelAudit) -> CliResult<Vec<Session<f64>>> {
    let entries = load_manifest(manifest)?;
    let mut sessions = Vec::new();
    for entry in &entries {
        let Some(domain) = spec.domain_of(&entry.domain) else {
            warn!("session {} has domain tag '{}' outside the experiment; skipped", entry.session_id, entry.domain);
            continue;
        };
        let load = match (domain, entry.split) {
            (Domain::Source, Split::Test) => Load::Skip,
            (Domain::Source, _) => roles.source,
            (Domain::Target, Split::Test) => roles.target_test,
            (Domain::Target, _) => roles.target_train,
        };
        if load != Load::Skip {
            sessions.push(load_session(entry, domain, load == Load::Labeled, audit)?);
        }
    }
    Ok(sessions)
}

/// Writes `<out>/<command>.label_audit.tsv` and refuses target label reads
/// from commands that must not see them.
fn finish_audit(out: &Path, command: &str, audit: &LabelAudit, target_allowed: bool) -> CliResult<()> {
    write_text(&out.join(format!("{}.label_audit.tsv", command)), &audit.to_text())?;
    let n = audit.target_reads();
    if n > 0 && !target_allowed {
        return Err(CliError::Firewall(format!("{} read {} target label files", command, n)));
    }
    Ok(())
}

fn samples_of(sessions: &[Session<f64>], domain: Domain, split: impl Fn(Split) -> bool) -> CliResult<Vec<SpliceSample<f64>>> {
    let mut out = Vec::new();
    for s in sessions.iter().filter(|s| s.domain == domain && split(s.split)) {
        match s.labels {
            Some(_) => out.extend(s.labeled_samples()?),
            None => out.extend(s.unlabeled_samples()),
        }
    }
    Ok(out)
}

fn source_split(sessions: &[Session<f64>], cfg: &TrainConfig) -> CliResult<(Vec<SpliceSample<f64>>, Vec<SpliceSample<f64>>)> {
    Ok(source_samples(sessions, cfg.heldout_fraction, cfg.seed)?)
}

fn save_outputs(out: &Path, name: &str, bundle: &ModelBundle<f64>, history: &spkadapt::train::History) -> CliResult<()> {
    save_checkpoint(bundle, &out.join(format!("{}.ckpt", name)))?;
    history.write(&out.join(format!("{}.history.tsv", name)))?;
    Ok(())
}

fn run_pretrain(exp: &ExperimentArgs) -> CliResult<()> {
    let spec = experiment(exp, Some(Variant::PretrainOnly))?;
    let cfg = spec.train_config()?;
    create_dir(&exp.out)?;
    let audit = LabelAudit::new();
    let roles = Roles {
        source: Load::Labeled,
        target_train: Load::Skip,
        target_test: Load::Skip,
    };
    let sessions = load_sessions(&exp.manifest, &spec, roles, &audit)?;
    finish_audit(&exp.out, "pretrain", &audit, false)?;
    let (train, heldout) = source_split(&sessions, &cfg)?;
    info!("pretraining on {} windows, {} held out", train.len(), heldout.len());
    let (bundle, history) = pretrain(spec.model_config(), &cfg, &train, &heldout)?;
    save_outputs(&exp.out, Variant::PretrainOnly.name(), &bundle, &history)
}

fn run_adapt(exp: &ExperimentArgs, variant: Option<Variant>, checkpoint: Option<PathBuf>) -> CliResult<()> {
    let spec = experiment(exp, variant)?;
    let cfg = spec.train_config()?;
    if !cfg.variant.is_adversarial() {
        return Err(CliError::Invalid("adapt needs --variant gan or gr (or a variant in the experiment TOML)".into()));
    }
    create_dir(&exp.out)?;
    let audit = LabelAudit::new();
    let roles = Roles {
        source: Load::Labeled,
        target_train: Load::Unlabeled,
        target_test: Load::Skip,
    };
    let sessions = load_sessions(&exp.manifest, &spec, roles, &audit)?;
    finish_audit(&exp.out, cfg.variant.name(), &audit, false)?;
    let (train, heldout) = source_split(&sessions, &cfg)?;
    let target = samples_of(&sessions, Domain::Target, |_| true)?;
    let pool = TargetPool::from_samples(&target);
    let checkpoint = checkpoint.unwrap_or_else(|| exp.out.join("pretrain.ckpt"));
    let pretrained = load_checkpoint_expecting::<f64>(&checkpoint, &pretrain_config(&spec))?;
    info!(
        "adapting {} with {} source and {} target windows",
        cfg.variant,
        train.len(),
        pool.len()
    );
    let (bundle, history) = adapt(&pretrained, &cfg, &train, &heldout, &pool)?;
    save_outputs(&exp.out, cfg.variant.name(), &bundle, &history)
}

fn pretrain_config(spec: &ExperimentSpec) -> ModelConfig {
    ModelConfig {
        variant: Variant::PretrainOnly,
        ..spec.model_config()
    }
}

fn run_upper_bound(exp: &ExperimentArgs) -> CliResult<()> {
    let spec = experiment(exp, Some(Variant::UpperBound))?;
    let cfg = spec.train_config()?;
    create_dir(&exp.out)?;
    let audit = LabelAudit::new();
    let roles = Roles {
        source: Load::Labeled,
        target_train: Load::Labeled,
        target_test: Load::Skip,
    };
    let sessions = load_sessions(&exp.manifest, &spec, roles, &audit)?;
    finish_audit(&exp.out, "upperbound", &audit, true)?;
    let (train, heldout) = source_split(&sessions, &cfg)?;
    let target = samples_of(&sessions, Domain::Target, |_| true)?;
    let (bundle, history) = train_upper_bound(spec.model_config(), &cfg, &train, &heldout, &target)?;
    save_outputs(&exp.out, Variant::UpperBound.name(), &bundle, &history)
}

/// Copies truth labels onto predictions by (session, centre).
fn attach_truth(predictions: &mut PredictionSet<f64>, labeled: &[SpliceSample<f64>]) -> CliResult<()> {
    let truth: BTreeMap<(&str, usize), Option<Speaker>> = labeled
        .iter()
        .map(|s| ((s.session_id.as_str(), s.center), s.speaker))
        .collect();
    for p in &mut predictions.entries {
        match truth.get(&(p.session_id.as_str(), p.center)) {
            Some(t) => p.truth = *t,
            None => {
                return Err(spkadapt::Error::Alignment(format!(
                    "prediction {}@{} has no labeled test window",
                    p.session_id, p.center
                ))
                .into())
            }
        }
    }
    Ok(())
}

fn evaluate(exp: &ExperimentArgs, checkpoint: Option<PathBuf>, predictions: Option<PathBuf>, name: Option<String>) -> CliResult<()> {
    let spec = experiment(exp, None)?;
    create_dir(&exp.out)?;
    let audit = LabelAudit::new();
    let roles = Roles {
        source: Load::Skip,
        target_train: Load::Skip,
        target_test: Load::Labeled,
    };
    let sessions = load_sessions(&exp.manifest, &spec, roles, &audit)?;
    finish_audit(&exp.out, "evaluate", &audit, true)?;
    let test = samples_of(&sessions, Domain::Target, |s| s == Split::Test)?;
    let (mut set, input, fresh) = match (checkpoint, predictions) {
        (Some(c), _) => {
            let bundle = spkadapt::model::load_checkpoint::<f64>(&c)?;
            (predict(&bundle, &test)?, c, true)
        }
        (None, Some(p)) => (PredictionSet::read(&p)?, p, false),
        (None, None) => return Err(CliError::Invalid("evaluate needs --checkpoint or --predictions".into())),
    };
    attach_truth(&mut set, &test)?;
    let name = name.unwrap_or_else(|| stem(&input).trim_end_matches(".predictions").to_string());
    let report = mean_f1(&set)?;
    if fresh {
        set.write(&exp.out.join(format!("{}.predictions.tsv", name)))?;
    }
    write_text(&exp.out.join(format!("{}.report.txt", name)), &report.to_text(true))?;
    write_text(&exp.out.join(format!("{}.report.kv", name)), &report.to_kv())?;
    info!("{}: mean F1 {}", name, spkadapt::eval::sig6(report.mean_f1));
    Ok(())
}

fn fuse(exp: &ExperimentArgs, gan: Option<PathBuf>, gr: Option<PathBuf>) -> CliResult<()> {
    let spec = experiment(exp, None)?;
    let cfg = spec.train_config()?;
    create_dir(&exp.out)?;
    let audit = LabelAudit::new();
    let roles = Roles {
        source: Load::Labeled,
        target_train: Load::Skip,
        target_test: Load::Unlabeled,
    };
    let sessions = load_sessions(&exp.manifest, &spec, roles, &audit)?;
    finish_audit(&exp.out, "fuse", &audit, false)?;
    let (train, _) = source_split(&sessions, &cfg)?;
    let test = samples_of(&sessions, Domain::Target, |s| s == Split::Test)?;
    let model = spec.model_config();
    let gan = load_checkpoint_expecting::<f64>(&gan.unwrap_or_else(|| exp.out.join("gan.ckpt")), &ModelConfig { variant: Variant::Gan, ..model })?;
    let gr = load_checkpoint_expecting::<f64>(&gr.unwrap_or_else(|| exp.out.join("gr.ckpt")), &ModelConfig { variant: Variant::Gr, ..model })?;

    let fused = score_fuse(&predict(&gan, &test)?, &predict(&gr, &test)?)?;
    fused.write(&exp.out.join("score_fusion.predictions.tsv"))?;

    let labels: Vec<Speaker> = train.iter().filter_map(|s| s.speaker).collect();
    let fusion_cfg = FusionConfig {
        seed: cfg.seed,
        batch_size: cfg.batch_size,
        ..FusionConfig::default()
    };
    let net = embed_fuse_train(
        &EmbeddingSet::compute(&gan, &train)?.embeddings,
        &EmbeddingSet::compute(&gr, &train)?.embeddings,
        &labels,
        &fusion_cfg,
    )?;
    save_fusion_model(&net, &exp.out.join("embedding_fusion.model"))?;
    let post = net.posteriors(
        &EmbeddingSet::compute(&gan, &test)?.embeddings,
        &EmbeddingSet::compute(&gr, &test)?.embeddings,
    )?;
    PredictionSet::from_posteriors(&post, &test)?.write(&exp.out.join("embedding_fusion.predictions.tsv"))?;
    Ok(())
}

fn export(manifest: &Path, checkpoint: &Path, out: &Path, name: Option<String>) -> CliResult<()> {
    create_dir(out)?;
    let bundle = spkadapt::model::load_checkpoint::<f64>(checkpoint)?;
    let audit = LabelAudit::new();
    let mut samples = Vec::new();
    for entry in &load_manifest(manifest)? {
        let domain = if entry.domain == Domain::Target.as_str() {
            Domain::Target
        } else {
            Domain::Source
        };
        samples.extend(load_session::<f64>(entry, domain, false, &audit)?.unlabeled_samples());
    }
    finish_audit(out, "export-embeddings", &audit, false)?;
    let name = name.unwrap_or_else(|| stem(checkpoint));
    let set = export_embeddings(&bundle, &samples, &out.join(format!("{}.embeddings.dtns", name)))?;
    info!("exported {} embeddings", set.len());
    Ok(())
}
