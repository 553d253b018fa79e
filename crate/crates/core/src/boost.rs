//! The boosting loop: sample hard examples, have the oracle define and label
//! attributes, fit a stump on them, and reweight instances by logistic loss.

use alloc::string::String;
use alloc::vec::Vec;
use core::slice;

use serde::{Deserialize, Serialize};

use crate::cache::LabelCache;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::learner::{columns_of, stump_predictions, train_stump};
use crate::oracle::{Oracle, OracleBackend};
use crate::rng;
use crate::sampling::{sample_round, FilterState};
use crate::types::{
    AttrId, AttributeDefinition, AttributeMatrix, Dataset, EnsembleModel, Instance, Label, Round,
    Stump, WeightVector,
};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Stump confidence `0.5·ln((0.5+γ′)/(0.5−γ′))` with `|γ′| = min(|γ|, clamp)`.
pub fn alpha(gamma: f64, clamp: f64) -> Result<f64> {
    if !gamma.is_finite() || gamma.abs() > 0.5 + 1e-12 {
        return Err(Error::Invariant(alloc::format!("edge {gamma} outside [-0.5, 0.5]")));
    }
    if !(clamp > 0.0 && clamp < 0.5) {
        return Err(Error::Config(alloc::format!("gamma clamp {clamp} outside (0, 0.5)")));
    }
    let g = gamma.abs().min(clamp);
    let a = 0.5 * libm::log((0.5 + g) / (0.5 - g));
    Ok(if gamma < 0.0 { -a } else { a })
}

/// `1 / (1 + exp(margin))`, evaluated without overflow.
pub fn logistic_weight(margin: f64) -> f64 {
    libm::exp(-softplus(margin))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Logistic reweighting `wᵢ ∝ 1/(1+exp(yᵢH(xᵢ)))`, normalized to sum to one.
/// Normalization happens in log space so large margins cannot underflow
/// every weight to zero.
pub fn update_weights(margins: &[f64]) -> Result<WeightVector> {
    if margins.is_empty() {
        return Err(Error::Weights("no margins".into()));
    }
    if let Some(m) = margins.iter().find(|m| !m.is_finite()) {
        return Err(Error::Weights(alloc::format!("non-finite margin {m}")));
    }
    let logs: Vec<f64> = margins.iter().map(|&m| -softplus(m)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| libm::exp(l - top)).collect();
    WeightVector::normalize(raw)
}

/// One row of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: u32,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
    /// Attributes returned by the definition oracle this round, in reply order.
    pub attributes: Vec<AttrId>,
    pub stump: Stump,
    pub weighted_error: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Training accuracy of the ensemble after this round.
    pub train_accuracy: f64,
    /// Entropy (nats) of the weights this round sampled from.
    pub weight_entropy: f64,
    pub filter_calls: u64,
    pub sampling_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub schema_version: u32,
    pub iterations: Vec<IterationRecord>,
}

impl TrainTrace {
    pub fn final_train_accuracy(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.train_accuracy)
    }
}

/// What one round did to the training set, for observers.
#[derive(Debug)]
pub struct RoundView<'a> {
    pub iteration: u32,
    pub labels: &'a [Label],
    /// ±1 votes of this round's stump.
    pub predictions: &'a [Label],
    pub alpha: f64,
    /// `yᵢ·Hₜ₋₁(xᵢ)` and `yᵢ·Hₜ(xᵢ)`.
    pub margins_before: &'a [f64],
    pub margins_after: &'a [f64],
    pub weights_before: &'a WeightVector,
    pub weights_after: &'a WeightVector,
    pub matrix: &'a AttributeMatrix,
}

/// Runs the full boosting loop.
pub fn train<B: OracleBackend>(
    dataset: &Dataset,
    oracle: &mut Oracle<B>,
    config: &TrainConfig,
    cache: &mut dyn LabelCache,
) -> Result<(EnsembleModel, TrainTrace)> {
    train_observed(dataset, oracle, config, cache, |_| {})
}

/// [`train`] with a callback after every round.
pub fn train_observed<B: OracleBackend>(
    dataset: &Dataset,
    oracle: &mut Oracle<B>,
    config: &TrainConfig,
    cache: &mut dyn LabelCache,
    mut observer: impl FnMut(&RoundView<'_>),
) -> Result<(EnsembleModel, TrainTrace)> {
    config.validate()?;
    let n = dataset.len();
    let labels = dataset.labels();
    let mut weights = WeightVector::uniform(n);
    let mut scores = alloc::vec![0.0f64; n];
    let mut matrix = AttributeMatrix::for_dataset(dataset);
    let mut attributes: Vec<AttributeDefinition> = Vec::new();
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut trace = TrainTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        iterations: Vec::with_capacity(config.rounds),
    };

    for t in 1..=config.rounds as u32 {
        let mut step = || -> Result<()> {
            let mut state = FilterState::new(
                config.delta,
                config.epsilon,
                rng::stream(config.seed, "filter", t as u64),
            )?;
            let r_max = config.r_max_factor.saturating_mul(t as u64);
            let (sample, report) = sample_round(dataset, &weights, config.q, &mut state, r_max)?;

            let defs = oracle.define_attributes(dataset, &sample, config.k, t)?;
            for d in &defs {
                if !attributes.iter().any(|a| a.attr_id == d.attr_id) {
                    attributes.push(d.clone());
                }
            }
            oracle.set_iteration(t);
            oracle.label_instances(dataset.instances(), &defs, cache, &mut matrix)?;

            let fresh: Vec<AttrId> = defs.iter().map(|d| d.attr_id.clone()).collect();
            let cols = if config.cumulative_features {
                (0..matrix.n_cols()).collect()
            } else {
                columns_of(&matrix, &fresh)?
            };
            let best = train_stump(&matrix, &cols, &labels, &weights)?;
            if best.edge < 0.0 {
                return Err(Error::Invariant(alloc::format!("negative edge {}", best.edge)));
            }
            let a = alpha(best.edge, config.gamma_clamp)?;
            let votes = stump_predictions(&matrix, best.column, &best.stump)?;

            let margins_before: Vec<f64> = scores.iter().zip(&labels).map(|(s, y)| s * y.sign()).collect();
            for (s, h) in scores.iter_mut().zip(&votes) {
                *s += a * h.sign();
            }
            let margins_after: Vec<f64> = scores.iter().zip(&labels).map(|(s, y)| s * y.sign()).collect();
            let next = update_weights(&margins_after)?;
            if (next.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::Invariant("weights lost normalization".into()));
            }

            let correct = scores
                .iter()
                .zip(&labels)
                .filter(|(s, y)| Label::from_sign(**s, config.tie_prediction) == **y)
                .count();
            let ids = |idx: &[usize]| idx.iter().map(|&i| dataset.get(i).id.clone()).collect();
            trace.iterations.push(IterationRecord {
                t,
                positives: ids(&sample.positives),
                negatives: ids(&sample.negatives),
                attributes: fresh,
                stump: best.stump.clone(),
                weighted_error: best.weighted_error,
                gamma: best.edge,
                alpha: a,
                train_accuracy: correct as f64 / n as f64,
                weight_entropy: weights.entropy(),
                filter_calls: report.filter_calls,
                sampling_fallback: report.fallback_used,
            });
            observer(&RoundView {
                iteration: t,
                labels: &labels,
                predictions: &votes,
                alpha: a,
                margins_before: &margins_before,
                margins_after: &margins_after,
                weights_before: &weights,
                weights_after: &next,
                matrix: &matrix,
            });
            rounds.push(Round {
                stump: best.stump,
                alpha: a,
            });
            weights = next;
            Ok(())
        };
        step().map_err(|e| e.at_iteration(t))?;
    }

    let model = EnsembleModel::new(rounds, attributes, config.clone())?;
    Ok((model, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// `Σ αₜ hₜ(x)`.
    pub margin: f64,
}

pub fn predict<B: OracleBackend>(
    model: &EnsembleModel,
    instance: &Instance,
    oracle: &mut Oracle<B>,
    cache: &mut dyn LabelCache,
) -> Result<Prediction> {
    Ok(predict_many(model, slice::from_ref(instance), oracle, cache)?[0])
}

/// Labels every instance on the model's referenced attributes (one batched
/// query per uncached instance) and evaluates the ensemble.
pub fn predict_many<B: OracleBackend>(
    model: &EnsembleModel,
    instances: &[Instance],
    oracle: &mut Oracle<B>,
    cache: &mut dyn LabelCache,
) -> Result<Vec<Prediction>> {
    if model.rounds().is_empty() {
        return Err(Error::Model("cannot predict with an empty ensemble".into()));
    }
    if instances.is_empty() {
        return Ok(Vec::new());
    }
    let attrs: Vec<AttributeDefinition> = model.referenced_attributes().into_iter().cloned().collect();
    let mut matrix = AttributeMatrix::new(instances.iter().map(|i| i.id.as_str()))?;
    oracle.set_iteration(0);
    oracle.label_instances(instances, &attrs, cache, &mut matrix)?;
    let tie = model.config().tie_prediction;
    (0..instances.len())
        .map(|row| {
            let margin = model.margin(|a| matrix.col(a).and_then(|c| matrix.get(row, c).as_bool()))?;
            Ok(Prediction {
                label: Label::from_sign(margin, tie),
                margin,
            })
        })
        .collect()
}
