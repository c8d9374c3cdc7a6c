use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{resolve_path, RunConfig};
use super::manifest::Manifest;
use crate::data::synthetic::{generate, SyntheticSpec};
use crate::data::{
    build_vocab, concat_features, load_features, load_tsv, split_shuffle, stats, to_tsv, Dialogue, Label,
};
use crate::ensemble::{final_ensemble, load_predictions, vote_committee, PredictionSet};
use crate::error::{Error, Result};
use crate::evaluation::{agreement_matrix, matrix_to_tsv, micro_f1};
use crate::hpo::{bo_loop, Assignment};
use crate::io::write_atomic;
use crate::models::{
    lr_train, Checkpoint, Classifier, EncoderKind, LrOptions, ModelConfig, CLASSIFIER_KIND,
};
use crate::numerics::LrSchedule;
use crate::training::{train, train_committee, TrainOptions};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `out.tsv` -> `out.tsv.manifest.json`
fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn finish(mut manifest: Manifest, start: Instant, path: &Path) -> Result<()> {
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    manifest.write(path)
}

fn gold_labels(corpus: &[Dialogue]) -> Result<Vec<Label>> {
    corpus
        .iter()
        .map(|d| {
            d.label
                .ok_or_else(|| Error::InvalidArgument(format!("dialogue {} has no gold label", d.id)))
        })
        .collect()
}

pub fn cmd_synth(n: usize, seed: u64, prefix: &str, out: &Path) -> Result<Value> {
    let start = Instant::now();
    let spec = SyntheticSpec::new(n, seed);
    let corpus = generate(&spec, prefix);
    write_atomic(out, to_tsv(&corpus)?.as_bytes())?;
    let mut manifest = Manifest::new("synth", &json!({"spec": spec, "prefix": prefix}), vec![seed])?;
    manifest.outputs.push(out.to_path_buf());
    finish(manifest, start, &sidecar(out))?;
    Ok(json!({"written": out, "stats": stats(&corpus)}))
}

pub fn cmd_stats(corpus: &Path, labeled: bool) -> Result<Value> {
    let corpus = load_tsv(resolve_path(corpus), labeled)?;
    Ok(serde_json::to_value(stats(&corpus))?)
}

fn load_config(config: &Path, seed: Option<u64>) -> Result<RunConfig> {
    RunConfig::load(config)?.with_seed(seed).resolve_and_validate()
}

pub fn cmd_prepare(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Value> {
    let start = Instant::now();
    let cfg = load_config(config, seed)?;
    let out = cfg.out_dir(out)?;
    let train_set = load_tsv(&cfg.data.train, true)?;
    let mut manifest = Manifest::new("prepare", &cfg, vec![cfg.model.seed])?;
    manifest.input(&cfg.data.train)?;
    let mut summary = json!({"train": stats(&train_set)});
    for (name, path) in [("dev", &cfg.data.dev), ("test", &cfg.data.test)] {
        if let Some(p) = path {
            summary[name] = serde_json::to_value(stats(&load_tsv(p, true)?))?;
            manifest.input(p)?;
        }
    }
    let vocab = build_vocab(&train_set, cfg.data.min_count)?;
    summary["vocab_size"] = json!(vocab.len());
    create_dir(&out)?;
    let mut tokens = vocab.tokens().join("\n");
    tokens.push('\n');
    write_atomic(out.join("vocab.txt"), tokens.as_bytes())?;
    write_json(&out.join("stats.json"), &summary)?;
    manifest.outputs = vec![out.join("vocab.txt"), out.join("stats.json")];
    finish(manifest, start, &out.join("manifest.json"))?;
    Ok(summary)
}

pub fn cmd_train(config: &Path, seed: Option<u64>, jobs: usize, out: Option<&Path>) -> Result<Value> {
    let start = Instant::now();
    let cfg = load_config(config, seed)?;
    let out = cfg.out_dir(out)?;
    let train_set = load_tsv(&cfg.data.train, true)?;
    let dev_set = cfg.data.dev.as_ref().map(|p| load_tsv(p, true)).transpose()?;
    let vocab = build_vocab(&train_set, cfg.data.min_count)?;
    create_dir(&out)?;
    let k = cfg.committee.k;
    let seeds = if k == 1 {
        vec![cfg.model.seed, cfg.train.seed]
    } else {
        (0..k as u64).map(|i| cfg.committee.base_seed + i).collect()
    };
    let mut manifest = Manifest::new("train", &cfg, seeds)?;
    manifest.input(&cfg.data.train)?;
    if let Some(p) = &cfg.data.dev {
        manifest.input(p)?;
    }
    let summary = if k == 1 {
        let (tr, va) = match dev_set {
            Some(dev) => (train_set, dev),
            None => split_shuffle(&train_set, cfg.train.seed, cfg.data.val_fraction)?,
        };
        let model = Classifier::new(cfg.model.clone(), vocab)?;
        let (model, report) = train(model, &tr, &va, &cfg.train)?;
        let path = out.join("model.ckpt");
        model.to_checkpoint()?.save(&path)?;
        write_json(&out.join("report.json"), &report)?;
        manifest.outputs = vec![path, out.join("report.json")];
        json!({"best_epoch": report.best_epoch, "best_val_f1": report.best_val_f1, "epochs": report.epochs.len()})
    } else {
        let members = train_committee(
            &train_set,
            k,
            cfg.data.val_fraction,
            cfg.committee.base_seed,
            jobs,
            &cfg.train,
            |seed| {
                let config = ModelConfig {
                    seed,
                    ..cfg.model.clone()
                };
                Classifier::new(config, vocab.clone())
            },
        )?;
        let mut reports = Vec::with_capacity(k);
        for (i, m) in members.iter().enumerate() {
            let path = out.join(format!("member_{i:02}.ckpt"));
            m.model.to_checkpoint()?.save(&path)?;
            manifest.outputs.push(path);
            reports.push(json!({"split_seed": m.split_seed, "report": m.report}));
        }
        let report = json!({"members": reports});
        write_json(&out.join("report.json"), &report)?;
        manifest.outputs.push(out.join("report.json"));
        let f1s: Vec<f64> = members.iter().map(|m| m.report.best_val_f1).collect();
        json!({"members": k, "best_val_f1": f1s})
    };
    finish(manifest, start, &out.join("manifest.json"))?;
    Ok(summary)
}

/// Checkpoint files named directly, or every `*.ckpt` inside a named directory.
fn checkpoint_paths(models: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for m in models {
        if m.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(m)
                .map_err(|e| Error::io(m, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(Error::InvalidArgument(format!("no checkpoints in {}", m.display())));
            }
            paths.extend(found);
        } else {
            paths.push(m.clone());
        }
    }
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub models: Vec<PathBuf>,
    pub corpus: PathBuf,
    pub labeled: bool,
    pub out: PathBuf,
}

fn out_name(out: &Path) -> String {
    out.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "predictions".into())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<Value> {
    let start = Instant::now();
    let corpus_path = resolve_path(&args.corpus);
    let corpus = load_tsv(&corpus_path, args.labeled)?;
    let ids: Vec<String> = corpus.iter().map(|d| d.id.clone()).collect();
    let paths = checkpoint_paths(&args.models)?;
    let mut manifest = Manifest::new("predict", &json!({"models": paths, "corpus": corpus_path}), vec![])?;
    manifest.input(&corpus_path)?;
    let mut sets = Vec::with_capacity(paths.len());
    for path in &paths {
        manifest.input(path)?;
        let ckpt = Checkpoint::load(path)?;
        if ckpt.kind != CLASSIFIER_KIND {
            return Err(Error::Checkpoint(format!(
                "{} holds a {} model, which cannot label raw dialogues",
                path.display(),
                ckpt.kind
            )));
        }
        let model = Classifier::from_checkpoint(&ckpt)?;
        let mut labels = Vec::with_capacity(corpus.len());
        let mut probs = Vec::with_capacity(corpus.len());
        for d in &corpus {
            let (label, p) = model.predict(&model.encode(d))?;
            labels.push(label);
            probs.push(p);
        }
        sets.push(PredictionSet::new(out_name(path), ids.clone(), labels, Some(probs))?);
    }
    let mut result = if sets.len() == 1 {
        sets.pop().expect("one set")
    } else {
        vote_committee(&sets)?
    };
    result.name = out_name(&args.out);
    write_atomic(&args.out, result.to_tsv().as_bytes())?;
    manifest.outputs.push(args.out.clone());
    finish(manifest, start, &sidecar(&args.out))?;
    let mut summary = json!({"written": args.out, "models": paths.len(), "examples": result.len()});
    if corpus.iter().all(|d| d.label.is_some()) && !corpus.is_empty() {
        summary["micro_f1"] = json!(micro_f1(&gold_labels(&corpus)?, &result.labels)?.f1());
    }
    Ok(summary)
}

pub fn cmd_eval(pred: &Path, gold: &Path, out: Option<&Path>) -> Result<Value> {
    let start = Instant::now();
    let predictions = load_predictions(pred)?;
    let gold_path = resolve_path(gold);
    let corpus = load_tsv(&gold_path, true)?;
    predictions.check_ids(&corpus.iter().map(|d| d.id.as_str()).collect::<Vec<_>>())?;
    let report = micro_f1(&gold_labels(&corpus)?, &predictions.labels)?;
    if let Some(out) = out {
        write_json(out, &report)?;
        let mut manifest = Manifest::new("eval", &json!({"pred": pred, "gold": gold_path}), vec![])?;
        manifest.input(pred)?;
        manifest.input(&gold_path)?;
        manifest.outputs.push(out.to_path_buf());
        finish(manifest, start, &sidecar(out))?;
    }
    Ok(serde_json::to_value(report)?)
}

fn load_sets(files: &[PathBuf]) -> Result<Vec<PredictionSet>> {
    files.iter().map(load_predictions).collect()
}

fn write_vote(command: &str, files: &[PathBuf], out: &Path, set: PredictionSet) -> Result<Value> {
    let start = Instant::now();
    let set = PredictionSet {
        name: out_name(out),
        ..set
    };
    write_atomic(out, set.to_tsv().as_bytes())?;
    let mut manifest = Manifest::new(command, &json!({"files": files}), vec![])?;
    for f in files {
        manifest.input(f)?;
    }
    manifest.outputs.push(out.to_path_buf());
    finish(manifest, start, &sidecar(out))?;
    Ok(json!({"written": out, "voters": files.len(), "examples": set.len()}))
}

pub fn cmd_vote(files: &[PathBuf], out: &Path) -> Result<Value> {
    let sets = load_sets(files)?;
    write_vote("vote", files, out, vote_committee(&sets)?)
}

pub fn cmd_ensemble(files: &[PathBuf], out: &Path) -> Result<Value> {
    let sets = load_sets(files)?;
    write_vote("ensemble", files, out, final_ensemble(&sets)?)
}

pub fn cmd_correlate(files: &[PathBuf], out: &Path) -> Result<Value> {
    let start = Instant::now();
    let sets = load_sets(files)?;
    for s in &sets[1..] {
        s.check_ids(&sets[0].ids)?;
    }
    let labels: Vec<&[Label]> = sets.iter().map(|s| s.labels.as_slice()).collect();
    let matrix = agreement_matrix(&labels)?;
    let names: Vec<String> = sets.iter().map(|s| s.name.clone()).collect();
    write_atomic(out, matrix_to_tsv(&names, &matrix).as_bytes())?;
    let mut manifest = Manifest::new("correlate", &json!({"files": files}), vec![])?;
    for f in files {
        manifest.input(f)?;
    }
    manifest.outputs.push(out.to_path_buf());
    finish(manifest, start, &sidecar(out))?;
    Ok(json!({"written": out, "models": names, "matrix": matrix}))
}

/// Applies a search-space point to a base model config and training options.
///
/// Keys naming a `ModelConfig` field replace it; `warmup` selects a Noam
/// schedule over the resulting hidden size, `lr` a fixed rate and
/// `batch_size` the batch size. For transformer encoders the hidden size is
/// rounded down to a multiple of the head count.
pub fn apply_assignment(
    model: &ModelConfig,
    opts: &TrainOptions,
    assignment: &Assignment,
) -> Result<(ModelConfig, TrainOptions)> {
    let mut value = serde_json::to_value(model)?;
    let fields = value.as_object_mut().expect("config serialises to an object");
    let mut opts = *opts;
    let mut warmup = None;
    let as_u64 = |k: &str, v: &Value| {
        v.as_u64()
            .ok_or_else(|| Error::Config(format!("{k} must be a non-negative integer, got {v}")))
    };
    for (k, v) in assignment {
        match k.as_str() {
            "warmup" => warmup = Some(as_u64(k, v)?),
            "batch_size" => opts.batch_size = as_u64(k, v)? as usize,
            "lr" => {
                let lr = v
                    .as_f64()
                    .ok_or_else(|| Error::Config(format!("lr must be a number, got {v}")))?;
                opts.schedule = LrSchedule::Fixed { lr };
            }
            _ if fields.contains_key(k) => {
                fields.insert(k.clone(), v.clone());
            }
            _ => return Err(Error::Config(format!("unknown hyper-parameter {k}"))),
        }
    }
    let mut model: ModelConfig =
        serde_json::from_value(value).map_err(|e| Error::Config(format!("bad hyper-parameter value: {e}")))?;
    if model.encoder == EncoderKind::Utrs && model.n_heads > 0 && !model.hidden_size.is_multiple_of(model.n_heads) {
        model.hidden_size = (model.hidden_size / model.n_heads).max(1) * model.n_heads;
    }
    if let Some(warmup) = warmup {
        opts.schedule = LrSchedule::Noam {
            d_model: model.hidden_size,
            warmup,
            factor: 1.0,
        };
    }
    model.validate()?;
    Ok((model, opts))
}

pub fn cmd_hpo(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Value> {
    let start = Instant::now();
    let cfg = load_config(config, seed)?;
    let out = cfg.out_dir(out)?;
    let space = &cfg.hpo.space;
    apply_assignment(&cfg.model, &cfg.train, &space.decode(&vec![0.5; space.len()])?)?;
    let train_set = load_tsv(&cfg.data.train, true)?;
    let (tr, va) = match &cfg.data.dev {
        Some(p) => (train_set.clone(), load_tsv(p, true)?),
        None => split_shuffle(&train_set, cfg.train.seed, cfg.data.val_fraction)?,
    };
    let vocab = build_vocab(&train_set, cfg.data.min_count)?;
    let objective = |a: &Assignment| -> Result<f64> {
        let (model, opts) = apply_assignment(&cfg.model, &cfg.train, a)?;
        let (_, report) = train(Classifier::new(model, vocab.clone())?, &tr, &va, &opts)?;
        log::info!("hpo trial {a:?}: validation F1 {:.4}", report.best_val_f1);
        Ok(report.best_val_f1)
    };
    let result = bo_loop(objective, space, &cfg.hpo.bo_options())?;
    create_dir(&out)?;
    write_json(&out.join("trials.json"), &result.history)?;
    let (model, opts) = apply_assignment(&cfg.model, &cfg.train, &result.best.config)?;
    let best = json!({"assignment": result.best.config, "y": result.best.y, "model": model, "train": opts});
    write_json(&out.join("best.json"), &best)?;
    let mut manifest = Manifest::new("hpo", &cfg, vec![cfg.hpo.seed, cfg.model.seed, cfg.train.seed])?;
    manifest.input(&cfg.data.train)?;
    manifest.outputs = vec![out.join("trials.json"), out.join("best.json")];
    finish(manifest, start, &out.join("manifest.json"))?;
    Ok(json!({"trials": result.history.len(), "best": best}))
}

pub fn cmd_features_lr(features: &[PathBuf], labels: &Path, l2: Option<f64>, out: &Path) -> Result<Value> {
    let start = Instant::now();
    let paths: Vec<PathBuf> = features.iter().map(|p| resolve_path(p)).collect();
    let parts = paths.iter().map(load_features).collect::<Result<Vec<_>>>()?;
    let matrix = concat_features(&parts)?;
    let corpus_path = resolve_path(labels);
    let corpus = load_tsv(&corpus_path, true)?;
    matrix.check_aligned(&corpus.iter().map(|d| d.id.as_str()).collect::<Vec<_>>())?;
    let gold = gold_labels(&corpus)?;
    let mut options = LrOptions::default();
    if let Some(l2) = l2 {
        options.l2 = l2;
    }
    let (model, report) = lr_train(&matrix, &gold, &options)?;
    let pred = (0..matrix.len())
        .map(|i| model.predict(matrix.values.row(i)).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    let train_f1 = micro_f1(&gold, &pred)?.f1();
    create_dir(out)?;
    model.to_checkpoint(&options)?.save(out.join("model.ckpt"))?;
    let summary = json!({
        "examples": matrix.len(),
        "dim": matrix.dim(),
        "train_micro_f1": train_f1,
        "report": report,
    });
    write_json(&out.join("report.json"), &summary)?;
    let mut manifest = Manifest::new("features-lr", &json!({"features": paths, "labels": corpus_path, "options": options}), vec![])?;
    for p in &paths {
        manifest.input(p)?;
    }
    manifest.input(&corpus_path)?;
    manifest.outputs = vec![out.join("model.ckpt"), out.join("report.json")];
    finish(manifest, start, &out.join("manifest.json"))?;
    Ok(json!({"examples": matrix.len(), "dim": matrix.dim(), "train_micro_f1": train_f1, "train_accuracy": report.train_accuracy}))
}
