//! Repeated train/test runs on a synthetic world.

use std::time::Instant;

use attriboost_core::synth::{generate_split, SynthWorld};
use attriboost_core::{predict_many, rng, train, Error, MemoryCache, Oracle, OracleConfig, QueryLedger, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mean_acc: f64,
    /// Sample standard deviation (n - 1); 0 for a single trial.
    pub std_acc: f64,
    pub trials: usize,
    pub define_calls: u64,
    pub label_calls: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub accuracy: f64,
    pub ledger: QueryLedger,
}

/// Trial `i` uses the world reseeded with a child of `world.seed` and the
/// training seed derived from `config.seed`, so trials are independent and
/// the whole report is a function of the two master seeds.
pub fn run_trial(world: &SynthWorld, n_train: usize, n_test: usize, config: &TrainConfig, trial: u64) -> Result<TrialResult> {
    let world = SynthWorld {
        seed: rng::child_seed(world.seed, "trial-world", trial),
        ..world.clone()
    };
    let config = TrainConfig {
        seed: rng::child_seed(config.seed, "trial-train", trial),
        ..config.clone()
    };
    let (sets, backend) = generate_split(&world, &[n_train, n_test])?;
    let mut oracle = Oracle::new(&backend, OracleConfig::default());
    let mut cache = MemoryCache::new();
    let (model, _) = train(&sets[0], &mut oracle, &config, &mut cache)?;
    let preds = predict_many(&model, sets[1].instances(), &mut oracle, &mut cache)?;
    let correct = preds
        .iter()
        .zip(sets[1].instances())
        .filter(|(p, x)| p.label == x.label)
        .count();
    Ok(TrialResult {
        accuracy: correct as f64 / n_test as f64,
        ledger: oracle.take_ledger(),
    })
}

/// Mean and sample standard deviation, accumulated in index order.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Runs `trials` independent trials on up to `workers` threads. Results are
/// reduced in trial order, so the report does not depend on scheduling.
pub fn run_experiment(
    world: &SynthWorld,
    n_train: usize,
    n_test: usize,
    config: &TrainConfig,
    trials: usize,
    workers: usize,
) -> Result<Report> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()).into());
    }
    let start = Instant::now();
    let workers = workers.clamp(1, trials);
    let mut results: Vec<Option<Result<TrialResult>>> = (0..trials).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunks: Vec<_> = results.chunks_mut(trials.div_ceil(workers)).enumerate().collect();
        for (c, chunk) in chunks {
            let first = c * trials.div_ceil(workers);
            s.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    let t = (first + j) as u64;
                    *slot = Some(run_trial(world, n_train, n_test, config, t).map_err(|e| tag(e, t)));
                }
            });
        }
    });
    let mut accs = Vec::with_capacity(trials);
    let mut ledger = QueryLedger::default();
    for r in results {
        let r = r.expect("every trial runs")?;
        accs.push(r.accuracy);
        ledger.merge(&r.ledger);
    }
    let (mean_acc, std_acc) = mean_std(&accs);
    Ok(Report {
        mean_acc,
        std_acc,
        trials,
        define_calls: ledger.define_calls,
        label_calls: ledger.label_calls,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

fn tag(e: AppError, trial: u64) -> AppError {
    AppError::Trial {
        trial,
        source: Box::new(e),
    }
}
