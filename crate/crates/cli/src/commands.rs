use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fuznet::autodiff::BackwardFault;
use fuznet::modelzoo::{
    attention_ratios, parse_rmse_file, reciprocal_scaling, ModelConfig, ModelKind,
};
use fuznet::synthdata::{generate_corpus, Corpus, CorpusConfig, Partition, MANIFEST_FILE};
use fuznet::training::{evaluate, train as run_training, TrainConfig};
use fuznet::verify::{gradcheck_suite, GRADCHECK_TOLERANCE};
use fuznet::Model64;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::Common;

pub const CHECKPOINT_FILE: &str = "model.fznet";

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_dev: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Generate only these features (repeatable).
    #[arg(long = "feature")]
    features: Vec<String>,
    #[arg(long)]
    text_strength: Option<f64>,
    #[arg(long)]
    audio_strength: Option<f64>,
    #[arg(long)]
    video_strength: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus directory written by `generate`.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// single, videolld_fused, video_bovw_fused, video_text_fused,
    /// audio_text_fused or all_fusion.
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "feature")]
    features: Vec<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    freeze_scaling: bool,
    /// `uniform` or `from-rmse-file:PATH`.
    #[arg(long)]
    scaling_init: Option<String>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Keep the final parameters instead of the best dev epoch.
    #[arg(long)]
    keep_last: bool,
    /// Start the regressor bias at the mean train label.
    #[arg(long)]
    init_output_bias: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// train, dev or test.
    #[arg(long)]
    partition: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Fault {
    TanhBackward,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, hide = true)]
    inject_fault: Option<Fault>,
}

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(d) = common.scale_divisor {
        cfg.scale_divisor = Some(d);
    }
    Ok(cfg)
}

/// Creates `<out>/<timestamp>-seed<N>` (suffixed when taken) and writes the
/// resolved configuration into it.
fn run_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.out)?;
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
    let base = format!("{stamp}-seed{}", cfg.seed);
    let mut dir = cfg.out.join(&base);
    let mut n = 1;
    while dir.exists() {
        dir = cfg.out.join(format!("{base}-{n}"));
        n += 1;
    }
    fs::create_dir(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(dir)
}

fn require_corpus(path: Option<&Path>) -> Result<PathBuf, CliError> {
    let p = path.ok_or_else(|| CliError::Config("no corpus given (use --corpus)".into()))?;
    if !p.join(MANIFEST_FILE).is_file() {
        return Err(CliError::Config(format!(
            "no corpus manifest under {}",
            p.display()
        )));
    }
    Ok(p.to_path_buf())
}

pub fn generate(common: &Common, a: GenerateArgs) -> Result<(), CliError> {
    let mut cfg = base_config(common)?;
    let g = &mut cfg.generate;
    g.n_train = a.n_train.unwrap_or(g.n_train);
    g.n_dev = a.n_dev.unwrap_or(g.n_dev);
    g.n_test = a.n_test.unwrap_or(g.n_test);
    if !a.features.is_empty() {
        g.features = Some(a.features);
    }
    g.strength.text = a.text_strength.unwrap_or(g.strength.text);
    g.strength.audio = a.audio_strength.unwrap_or(g.strength.audio);
    g.strength.video = a.video_strength.unwrap_or(g.strength.video);
    let corpus = CorpusConfig {
        seed: cfg.seed,
        n_train: g.n_train,
        n_dev: g.n_dev,
        n_test: g.n_test,
        scale_divisor: cfg.scale_divisor.unwrap_or(100),
        strength: g.strength,
        features: g.features.clone(),
    };
    corpus.validate()?;
    corpus.generator()?;
    let dir = run_dir(&cfg)?;
    let manifest = generate_corpus(&dir, &corpus)?;
    println!("manifest={}", dir.join(MANIFEST_FILE).display());
    println!("sessions={}", manifest.entries.len());
    println!("digest={}", manifest.digest(&dir)?);
    Ok(())
}

fn scaling_from(spec: &str) -> Result<Option<Vec<f64>>, CliError> {
    if spec == "uniform" {
        return Ok(None);
    }
    let path = spec.strip_prefix("from-rmse-file:").ok_or_else(|| {
        CliError::Config(format!(
            "--scaling-init must be `uniform` or `from-rmse-file:PATH`, got `{spec}`"
        ))
    })?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read RMSE file {path}: {e}")))?;
    Ok(Some(reciprocal_scaling(&parse_rmse_file(&text)?)?))
}

pub fn train(common: &Common, a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = base_config(common)?;
    let t = &mut cfg.train;
    if a.corpus.is_some() {
        t.corpus = a.corpus;
    }
    if let Some(m) = a.model {
        t.model = m;
    }
    if !a.features.is_empty() {
        t.features = a.features;
    }
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = a.lr.unwrap_or(t.learning_rate);
    t.freeze_scaling |= a.freeze_scaling;
    if let Some(s) = a.scaling_init {
        t.scaling_init = s;
    }
    t.hidden_size = a.hidden_size.unwrap_or(t.hidden_size);
    if a.clip_norm.is_some() {
        t.clip_norm = a.clip_norm;
    }
    t.keep_best &= !a.keep_last;
    t.init_output_bias |= a.init_output_bias;

    let kind: ModelKind = t.model.parse()?;
    let features = if t.features.is_empty() {
        kind.default_features()
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        t.features.clone()
    };
    let model_cfg = ModelConfig {
        kind,
        features,
        hidden_size: t.hidden_size,
        ffn_widths: t.ffn_widths.clone(),
        fusion_ffn_width: t.fusion_ffn_width,
        fused_len: t.fused_len,
        attention_size: t.attention_size,
        scaling_init: scaling_from(&t.scaling_init)?,
        freeze_scaling: t.freeze_scaling,
    };
    model_cfg.resolve(&fuznet::synthdata::Catalog::full())?;
    let train_cfg = TrainConfig {
        epochs: t.epochs,
        batch_size: t.batch_size,
        learning_rate: t.learning_rate,
        seed: cfg.seed,
        freeze_scaling: t.freeze_scaling,
        scale_divisor: cfg.scale_divisor.unwrap_or(100),
        clip_norm: t.clip_norm,
        keep_best: t.keep_best,
        init_output_bias: t.init_output_bias,
    };
    train_cfg.validate()?;
    let corpus_dir = require_corpus(t.corpus.as_deref())?;
    let corpus = Corpus::load(&corpus_dir, Some(&model_cfg.features))?;
    if cfg.scale_divisor.is_some_and(|d| d != corpus.scale_divisor) {
        return Err(CliError::Config(format!(
            "--scale-divisor {} does not match the corpus divisor {}",
            train_cfg.scale_divisor, corpus.scale_divisor
        )));
    }
    let mut model = Model64::build(&model_cfg, &corpus.catalog, cfg.seed)?;
    let dir = run_dir(&cfg)?;
    let history = run_training(&mut model, &corpus, &train_cfg)?;
    let best = history.best().expect("at least one epoch");
    let mut meta = BTreeMap::new();
    meta.insert("best_epoch".into(), best.epoch.to_string());
    meta.insert("corpus".into(), corpus_dir.display().to_string());
    model.save(&dir.join(CHECKPOINT_FILE), meta)?;
    fs::write(dir.join("history.tsv"), history.to_tsv())?;
    fs::write(dir.join("timings.tsv"), history.timings_tsv())?;
    fs::write(dir.join("metrics.txt"), best.dev.to_kv())?;
    println!("run={}", dir.display());
    println!("best_epoch={}", best.epoch);
    print!("{}", best.dev.to_kv());
    Ok(())
}

pub fn eval(common: &Common, a: EvalArgs, attention: bool) -> Result<(), CliError> {
    let mut cfg = base_config(common)?;
    let e = if attention {
        &mut cfg.report_attention
    } else {
        &mut cfg.eval
    };
    if a.checkpoint.is_some() {
        e.checkpoint = a.checkpoint;
    }
    if a.corpus.is_some() {
        e.corpus = a.corpus;
    }
    if let Some(p) = a.partition {
        e.partition = p;
    }
    let partition: Partition = e.partition.parse()?;
    let checkpoint = e
        .checkpoint
        .clone()
        .ok_or_else(|| CliError::Config("no checkpoint given (use --checkpoint)".into()))?;
    if !checkpoint.is_file() {
        return Err(CliError::Config(format!(
            "checkpoint {} not found",
            checkpoint.display()
        )));
    }
    let corpus_dir = require_corpus(e.corpus.as_deref())?;
    let (model, _) = Model64::load(&checkpoint)?;
    if attention && model.kind() != ModelKind::AllFeatureFusion {
        return Err(fuznet::Error::Contract(format!(
            "report-attention needs an all_fusion checkpoint, got {}",
            model.kind()
        ))
        .into());
    }
    let features = model.config().features.clone();
    let corpus = Corpus::load(&corpus_dir, Some(&features))?;
    let dir = run_dir(&cfg)?;
    if attention {
        let sessions = corpus.partition(partition);
        let report = attention_ratios(&model, &sessions)?;
        fs::write(dir.join("attention.txt"), report.to_string())?;
        print!("{report}");
    } else {
        let report = evaluate(&model, &corpus, partition)?;
        fs::write(dir.join("metrics.txt"), report.to_kv())?;
        print!("{}", report.to_kv());
    }
    Ok(())
}

pub fn gradcheck(common: &Common, a: GradcheckArgs) -> Result<(), CliError> {
    let cfg = base_config(common)?;
    let fault = match a.inject_fault {
        Some(Fault::TanhBackward) => BackwardFault::TanhBackward,
        None => BackwardFault::None,
    };
    let dir = run_dir(&cfg)?;
    let checks = gradcheck_suite(fault, cfg.seed)?;
    let mut lines = String::new();
    for c in &checks {
        let verdict = if c.passed(GRADCHECK_TOLERANCE) {
            "pass"
        } else {
            "FAIL"
        };
        lines.push_str(&format!(
            "{}\t{:.3e}\t{}\t{verdict}\n",
            c.name, c.max_rel_error, c.checked
        ));
    }
    fs::write(dir.join("gradcheck.txt"), &lines)?;
    print!("{lines}");
    println!("components={}", checks.len());
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed(GRADCHECK_TOLERANCE))
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "max relative error >= {GRADCHECK_TOLERANCE:e} in {}",
            failed.join(", ")
        )))
    }
}
