//! Library entry points behind each CLI subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use attriboost_core::{
    predict_many, train, Dataset, EnsembleModel, Label, LabelCache, Oracle, OracleBackend, OracleConfig,
    QueryLedger, TrainTrace,
};
use serde::Serialize;

use crate::backend::{build_backend, WorldFile};
use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::journal::{CacheStats, JournalCache};
use crate::manifest::write_manifest;
use crate::model_io::{load_trace, save_model, write_json};

pub const MODEL_FILE: &str = "model.json";
pub const TRACE_FILE: &str = "trace.json";
pub const LEDGER_FILE: &str = "ledger.json";
pub const CACHE_FILE: &str = "cache.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub rounds: usize,
    pub attributes: usize,
    pub final_train_accuracy: Option<f64>,
    pub define_calls: u64,
    pub label_calls: u64,
}

/// Trains on `dataset` with an explicit backend and writes model, trace,
/// ledger and label cache under `out_dir`.
pub fn train_with<B: OracleBackend>(
    dataset: &Dataset,
    backend: B,
    cfg: &RunConfig,
    out_dir: &Path,
) -> Result<(EnsembleModel, TrainTrace, QueryLedger)> {
    fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    let mut cache = JournalCache::open(&out_dir.join(CACHE_FILE))?;
    let mut oracle = Oracle::new(backend, cfg.oracle.clone());
    let (model, trace) = train(dataset, &mut oracle, &cfg.train, &mut cache)?;
    let ledger = oracle.take_ledger();
    save_model(&model, &out_dir.join(MODEL_FILE))?;
    write_json(&out_dir.join(TRACE_FILE), &trace)?;
    write_json(&out_dir.join(LEDGER_FILE), &ledger)?;
    Ok((model, trace, ledger))
}

/// Trains with the backend described by `cfg.oracle`.
pub fn train_run(dataset: &Dataset, cfg: &RunConfig, out_dir: &Path) -> Result<TrainSummary> {
    let backend = build_backend(&cfg.oracle)?;
    let (model, trace, ledger) = train_with(dataset, backend, cfg, out_dir)?;
    Ok(TrainSummary {
        out_dir: out_dir.to_path_buf(),
        seed: cfg.train.seed,
        rounds: model.rounds().len(),
        attributes: model.attributes().len(),
        final_train_accuracy: trace.final_train_accuracy(),
        define_calls: ledger.define_calls,
        label_calls: ledger.label_calls,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRow {
    pub id: String,
    pub prediction: Label,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub n: usize,
    pub confusion: Confusion,
    pub label_calls: u64,
    pub cache_hits: u64,
    pub predictions: Vec<PredictionRow>,
}

/// Default label cache for a model: `cache.jsonl` beside it.
pub fn default_cache_path(model_path: &Path) -> PathBuf {
    model_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(CACHE_FILE)
}

/// Predicts every instance with one batched query per uncached instance.
pub fn predict_with<B: OracleBackend>(
    model: &EnsembleModel,
    dataset: &Dataset,
    backend: B,
    oracle_cfg: &OracleConfig,
    cache: &mut dyn LabelCache,
    with_labels: bool,
) -> Result<(Vec<PredictionRow>, QueryLedger)> {
    let mut oracle = Oracle::new(backend, oracle_cfg.clone());
    let preds = predict_many(model, dataset.instances(), &mut oracle, cache)?;
    let rows = preds
        .iter()
        .zip(dataset.instances())
        .map(|(p, x)| PredictionRow {
            id: x.id.clone(),
            prediction: p.label,
            margin: p.margin,
            label: with_labels.then_some(x.label),
        })
        .collect();
    Ok((rows, oracle.take_ledger()))
}

pub fn predict_run(model: &EnsembleModel, dataset: &Dataset, cfg: &OracleConfig, cache_path: &Path) -> Result<Vec<PredictionRow>> {
    let mut cache = JournalCache::open(cache_path)?;
    Ok(predict_with(model, dataset, build_backend(cfg)?, cfg, &mut cache, false)?.0)
}

pub fn evaluate(rows: Vec<PredictionRow>, ledger: &QueryLedger) -> EvalReport {
    let mut c = Confusion::default();
    for r in &rows {
        match (r.prediction, r.label.unwrap_or(r.prediction)) {
            (Label::Pos, Label::Pos) => c.true_pos += 1,
            (Label::Pos, Label::Neg) => c.false_pos += 1,
            (Label::Neg, Label::Neg) => c.true_neg += 1,
            (Label::Neg, Label::Pos) => c.false_neg += 1,
        }
    }
    let n = rows.len();
    EvalReport {
        accuracy: (c.true_pos + c.true_neg) as f64 / n as f64,
        n,
        confusion: c,
        label_calls: ledger.label_calls,
        cache_hits: ledger.cache_hits,
        predictions: rows,
    }
}

pub fn eval_run(model: &EnsembleModel, dataset: &Dataset, cfg: &OracleConfig, cache_path: &Path) -> Result<EvalReport> {
    let mut cache = JournalCache::open(cache_path)?;
    let (rows, ledger) = predict_with(model, dataset, build_backend(cfg)?, cfg, &mut cache, true)?;
    Ok(evaluate(rows, &ledger))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttrRow {
    pub round: usize,
    pub attr_id: String,
    pub question: String,
    pub polarity: Label,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

/// Stump attributes by descending alpha; equal alphas keep round order.
pub fn attrs_listing(model: &EnsembleModel, trace: Option<&TrainTrace>) -> Vec<AttrRow> {
    let mut rows: Vec<AttrRow> = model
        .rounds()
        .iter()
        .enumerate()
        .map(|(i, r)| AttrRow {
            round: i + 1,
            attr_id: r.stump.attr_id.to_string(),
            question: model
                .attribute(&r.stump.attr_id)
                .map(|a| a.question.clone())
                .unwrap_or_default(),
            polarity: r.stump.polarity,
            alpha: r.alpha,
            gamma: trace.and_then(|t| t.iterations.get(i)).map(|rec| rec.gamma),
        })
        .collect();
    rows.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
    rows
}

/// Reads `trace.json` beside the model when it exists.
pub fn trace_beside(model_path: &Path) -> Result<Option<TrainTrace>> {
    let p = model_path.parent().unwrap_or_else(|| Path::new(".")).join(TRACE_FILE);
    if p.exists() {
        load_trace(&p).map(Some)
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedWorld {
    pub world: PathBuf,
    pub manifests: Vec<PathBuf>,
}

/// Writes `world.json` plus `train.jsonl` and `test.jsonl` (further splits
/// are named `split<i>.jsonl`).
pub fn synth_generate(wf: &WorldFile, out_dir: &Path) -> Result<GeneratedWorld> {
    let (sets, _) = wf.realize()?;
    fs::create_dir_all(out_dir).map_err(|e| AppError::io(out_dir, e))?;
    let world = out_dir.join("world.json");
    wf.save(&world)?;
    let mut manifests = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let name = match i {
            0 => "train.jsonl".to_string(),
            1 => "test.jsonl".to_string(),
            _ => format!("split{i}.jsonl"),
        };
        let p = out_dir.join(name);
        write_manifest(&p, set.instances())?;
        manifests.push(p);
    }
    Ok(GeneratedWorld { world, manifests })
}

pub fn cache_stats(path: &Path) -> Result<CacheStats> {
    Ok(JournalCache::open(path)?.stats())
}
