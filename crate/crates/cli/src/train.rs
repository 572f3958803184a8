use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use wavegain::data::{
    download_check, load_cifar, subsample_per_class, Dataset, Normalization, Variant,
};
use wavegain::nn::{
    build_lenet, build_wavelenet, evaluate, train as fit, Model, ModelConfig, Precision,
    TrainConfig,
};
use wavegain::transform::{load_filter_set, DEFAULT_LEVEL1};
use wavegain::Real;

use crate::checks::parse_precision;
use crate::run::{json, skip_false, to_pretty, CliError, CliResult, Run};
use crate::{setup, Globals};

/// Training-set sizes of the experiment grid.
pub const TRAIN_SIZES: [usize; 6] = [1000, 2000, 5000, 10000, 20000, 50000];

#[derive(Args, Serialize)]
pub struct TrainArgs {
    /// lenet or wavelenet
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    /// cifar10 or cifar100
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    /// Directory holding the binary distribution
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data_dir: Option<PathBuf>,
    /// Class-balanced training subset (1000, 2000, 5000, 10000, 20000 or 50000)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    train_size: Option<usize>,
    /// Number of seeds, run as first_seed, first_seed + 1, ...
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    first_seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    weight_decay: Option<f64>,
    #[arg(long, value_parser = parse_precision)]
    #[serde(skip_serializing_if = "Option::is_none")]
    precision: Option<Precision>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    filter_set: Option<String>,
    /// Score only the first N test images
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    val_size: Option<usize>,
    /// Only verify the dataset files and exit
    #[arg(long)]
    #[serde(skip_serializing_if = "skip_false")]
    download_check: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    model: String,
    dataset: String,
    data_dir: PathBuf,
    train_size: Option<usize>,
    seeds: usize,
    first_seed: u64,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    weight_decay: f64,
    precision: Precision,
    filter_set: String,
    val_size: Option<usize>,
    download_check: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let tc = TrainConfig::default();
        Self {
            model: "wavelenet".into(),
            dataset: "cifar10".into(),
            data_dir: "data".into(),
            train_size: Some(1000),
            seeds: 1,
            first_seed: 0,
            epochs: tc.epochs,
            batch_size: tc.batch_size,
            lr: tc.lr,
            weight_decay: tc.weight_decay,
            precision: tc.precision,
            filter_set: load_filter_set(DEFAULT_LEVEL1)
                .map(|f| f.name)
                .unwrap_or_default(),
            val_size: None,
            download_check: false,
        }
    }
}

fn model_config(
    name: &str,
    classes: usize,
    filter_set: &str,
    precision: Precision,
) -> CliResult<ModelConfig> {
    let mut cfg = match name {
        "lenet" => build_lenet(classes)?,
        "wavelenet" => build_wavelenet(classes)?,
        _ => {
            return Err(CliError::Config(format!(
                "unknown model '{name}' (expected lenet or wavelenet)"
            )))
        }
    };
    cfg.filter_set = load_filter_set(filter_set)?.name;
    cfg.precision = precision;
    Ok(cfg)
}

fn check_files(dir: &std::path::Path, variant: Variant) -> (Vec<wavegain::data::FileCheck>, bool) {
    let report = download_check(dir, variant);
    let ok = report.iter().all(|f| f.ok);
    (report, ok)
}

/// Checkpoint metadata needed to repeat the validation score.
#[derive(Serialize, Deserialize)]
struct CheckpointInfo {
    dataset: Variant,
    train_size: usize,
    val_size: usize,
    normalization: Normalization,
    val_acc: f64,
    precision: Precision,
}

fn run_seed<T: Real>(
    cfg: &ModelConfig,
    train_set: &Dataset,
    val_set: &Dataset,
    tc: &TrainConfig,
    variant: Variant,
    run: &mut Run,
) -> CliResult<f64> {
    let seed = tc.seed;
    let (model, metrics) = fit::<T>(cfg, train_set, val_set, tc, |m| {
        println!(
            "seed {seed} epoch {:>4}: loss {:.4}  train {:.2}%  val {:.2}%  ({:.1}s)",
            m.epoch,
            m.train_loss,
            100.0 * m.train_acc,
            100.0 * m.val_acc,
            m.seconds
        );
    })?;
    let sub = format!("seed_{seed}");
    metrics.write(run.dir.join(&sub))?;
    run.record(&format!("{sub}/metrics.csv"));
    run.record(&format!("{sub}/summary.json"));
    let info = CheckpointInfo {
        dataset: variant,
        train_size: train_set.len(),
        val_size: val_set.len(),
        normalization: train_set.stats,
        val_acc: metrics.final_val_acc,
        precision: tc.precision,
    };
    model.save(run.dir.join(&sub).join("checkpoint"), json(&info))?;
    run.record(&format!("{sub}/checkpoint"));
    Ok(metrics.final_val_acc)
}

pub fn train(args: TrainArgs, g: Globals) -> CliResult<()> {
    let (s, common) = setup::<TrainSettings>("train", &args, g)?;
    let variant: Variant = s.dataset.parse()?;
    if s.download_check {
        let (report, ok) = check_files(&s.data_dir, variant);
        for f in &report {
            println!(
                "{:<60} {}",
                f.path.display(),
                if f.ok { "ok" } else { "MISSING OR WRONG SIZE" }
            );
        }
        let mut run = Run::start("train", &s, &common, &[])?;
        run.write("download_check.json", to_pretty(&report))?;
        run.finish()?;
        return if ok {
            Ok(())
        } else {
            Err(CliError::Io(format!(
                "dataset files under {} are incomplete",
                s.data_dir.display()
            )))
        };
    }
    if let Some(n) = s.train_size {
        if !TRAIN_SIZES.contains(&n) {
            return Err(CliError::Config(format!(
                "train_size must be one of {TRAIN_SIZES:?}, got {n}"
            )));
        }
    }
    if s.seeds == 0 || s.epochs == 0 {
        return Err(CliError::Config(
            "seeds and epochs must be at least 1".into(),
        ));
    }
    let cfg = model_config(&s.model, variant.class_count(), &s.filter_set, s.precision)?;
    let base = TrainConfig {
        epochs: s.epochs,
        batch_size: s.batch_size,
        lr: s.lr,
        weight_decay: s.weight_decay,
        precision: s.precision,
        ..Default::default()
    };
    base.validate()?;

    let (full_train, test) = load_cifar(&s.data_dir, variant)?;
    let val_set = match s.val_size {
        Some(n) => test.head(n)?,
        None => test,
    };
    let seeds: Vec<u64> = (0..s.seeds as u64).map(|k| s.first_seed + k).collect();
    let mut run = Run::start("train", &s, &common, &seeds)?;
    run.note("model", &cfg);
    let mut finals = Vec::new();
    for &seed in &seeds {
        let train_set = match s.train_size {
            Some(n) if n < full_train.len() => subsample_per_class(&full_train, n, seed)?,
            Some(n) if n > full_train.len() => {
                return Err(CliError::Config(format!(
                    "train_size {n} exceeds the {} available",
                    full_train.len()
                )))
            }
            _ => full_train.clone(),
        };
        let tc = TrainConfig {
            seed,
            ..base.clone()
        };
        let acc = match s.precision {
            Precision::F32 => run_seed::<f32>(&cfg, &train_set, &val_set, &tc, variant, &mut run)?,
            Precision::F64 => run_seed::<f64>(&cfg, &train_set, &val_set, &tc, variant, &mut run)?,
        };
        finals.push(acc);
    }
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let std = if finals.len() > 1 {
        (finals.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (finals.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    run.write(
        "aggregate.json",
        to_pretty(&json!({
            "model": s.model,
            "dataset": variant,
            "train_size": s.train_size,
            "seeds": seeds,
            "final_val_acc": finals,
            "mean": mean,
            "std": std,
        })),
    )?;
    run.finish()?;
    println!(
        "{} on {variant}: mean top-1 {:.2}% (std {:.2}) over {} seed(s)",
        s.model,
        100.0 * mean,
        100.0 * std,
        finals.len()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct EvalArgs {
    /// Checkpoint directory written by `train`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    /// Score the first N test images instead of the logged count
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    val_size: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    checkpoint: Option<PathBuf>,
    data_dir: PathBuf,
    batch_size: usize,
    val_size: Option<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            checkpoint: None,
            data_dir: "data".into(),
            batch_size: TrainConfig::default().eval_batch_size,
            val_size: None,
        }
    }
}

fn score<T: Real>(dir: &std::path::Path, val: &Dataset, batch: usize) -> CliResult<(f64, String)> {
    let (model, _) = Model::<T>::load(dir)?;
    Ok((evaluate(&model, val, batch)?, model.config.name.clone()))
}

pub fn eval(args: EvalArgs, g: Globals) -> CliResult<()> {
    let (s, common) = setup::<EvalSettings>("eval", &args, g)?;
    let Some(dir) = s.checkpoint.clone() else {
        return Err(CliError::Config("--checkpoint is required".into()));
    };
    if s.batch_size == 0 {
        return Err(CliError::Config("batch size must be at least 1".into()));
    }
    let manifest = dir.join("model.json");
    let text = std::fs::read_to_string(&manifest).map_err(|e| crate::run::io_err(&manifest, e))?;
    let extra = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.get("extra").cloned())
        .ok_or_else(|| CliError::Io(format!("{}: no training metadata", manifest.display())))?;
    let info: CheckpointInfo = serde_json::from_value(extra)
        .map_err(|e| CliError::Io(format!("{}: {e}", manifest.display())))?;
    let (_, test) = load_cifar(&s.data_dir, info.dataset)?;
    let n = s.val_size.unwrap_or(info.val_size);
    let val = test.head(n)?.with_stats(info.normalization);
    let (acc, name) = match info.precision {
        Precision::F32 => score::<f32>(&dir, &val, s.batch_size)?,
        Precision::F64 => score::<f64>(&dir, &val, s.batch_size)?,
    };
    let same_split = val.len() == info.val_size;
    let reproduced = same_split && acc == info.val_acc;
    let mut run = Run::start("eval", &s, &common, &[])?;
    run.write(
        "eval.json",
        to_pretty(&json!({
            "model": name,
            "dataset": info.dataset,
            "samples": val.len(),
            "accuracy": acc,
            "logged_val_acc": info.val_acc,
            "reproduced": reproduced,
        })),
    )?;
    run.finish()?;
    println!(
        "{name} on {} {} images: top-1 {:.2}%",
        info.dataset,
        val.len(),
        100.0 * acc
    );
    if same_split && !reproduced {
        return Err(CliError::Verification(format!(
            "accuracy {acc} differs from the logged {}",
            info.val_acc
        )));
    }
    Ok(())
}
