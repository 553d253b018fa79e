//! Weight-driven selection of the examples shown to the definition oracle.
//!
//! `filter` is a rejection sampler: it shuffles the dataset and walks the
//! shuffled order, accepting item `i` with probability `w_i`, for at most
//! `min(N, ceil(2/ε · ln(1/δ′)))` trials where `δ′ = δ / (r(r+1))` shrinks with
//! the call counter `r`. `build_sample_set` calls it until `q` distinct
//! examples of each class have been collected.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{Dataset, Label, WeightVector, WEIGHT_SUM_TOLERANCE};

/// Per-round state of the rejection sampler.
#[derive(Debug, Clone)]
pub struct FilterState {
    r: u64,
    delta: f64,
    epsilon: f64,
    rng: Rng,
    scratch: Vec<usize>,
}

impl FilterState {
    pub fn new(delta: f64, epsilon: f64, rng: Rng) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) || !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Config(alloc::format!(
                "filter needs delta, epsilon in (0,1), got {delta}, {epsilon}"
            )));
        }
        Ok(FilterState {
            r: 0,
            delta,
            epsilon,
            rng,
            scratch: Vec::new(),
        })
    }

    /// Number of filter calls made so far.
    pub fn calls(&self) -> u64 {
        self.r
    }

    pub fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }
}

/// δ′ for the r-th call (r ≥ 1).
pub fn delta_prime(delta: f64, r: u64) -> f64 {
    let r = r as f64;
    delta / (r * (r + 1.0))
}

/// Trial budget `min(n, ceil(2/ε · ln(1/δ′)))`.
pub fn trial_budget(n: usize, epsilon: f64, delta_prime: f64) -> usize {
    let bound = libm::ceil(2.0 / epsilon * libm::log(1.0 / delta_prime));
    if bound >= n as f64 {
        n
    } else {
        bound.max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterDraw {
    /// Index into the dataset of the accepted item, `None` if every trial rejected.
    pub accepted: Option<usize>,
    /// Acceptance trials evaluated in this call.
    pub trials: usize,
    pub budget: usize,
    pub r: u64,
    pub delta_prime: f64,
}

pub fn filter(dataset: &Dataset, weights: &WeightVector, state: &mut FilterState) -> Result<FilterDraw> {
    filter_weights(weights.as_slice(), dataset.len(), state)
}

/// Same as [`filter`] over a bare weight slice of length `n`.
pub fn filter_weights(w: &[f64], n: usize, state: &mut FilterState) -> Result<FilterDraw> {
    if n == 0 {
        return Err(Error::Dataset("filter on an empty dataset".into()));
    }
    if w.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: w.len(),
        });
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(Error::Weights(alloc::format!(
            "filter needs normalized weights, sum is {sum}"
        )));
    }

    state.r += 1;
    let dp = delta_prime(state.delta, state.r);
    let budget = trial_budget(n, state.epsilon, dp);

    // Fisher–Yates, drawing only the prefix that will be scanned.
    let perm = &mut state.scratch;
    perm.clear();
    perm.extend(0..n);
    let mut accepted = None;
    let mut trials = 0;
    for i in 0..budget {
        let j = i + state.rng.random_range(0..(n - i) as u64) as usize;
        perm.swap(i, j);
        trials += 1;
        let item = perm[i];
        if state.rng.random::<f64>() < w[item] {
            accepted = Some(item);
            break;
        }
    }
    Ok(FilterDraw {
        accepted,
        trials,
        budget,
        r: state.r,
        delta_prime: dp,
    })
}

/// Up to `q` positives and `q` negatives, as dataset indices, without repeats.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleSet {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl SampleSet {
    pub fn is_complete(&self, q: usize) -> bool {
        self.positives.len() == q && self.negatives.len() == q
    }

    pub fn contains(&self, i: usize) -> bool {
        self.positives.contains(&i) || self.negatives.contains(&i)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.positives.iter().chain(self.negatives.iter()).copied()
    }

    fn side_mut(&mut self, label: Label) -> &mut Vec<usize> {
        match label {
            Label::Pos => &mut self.positives,
            Label::Neg => &mut self.negatives,
        }
    }

    fn side(&self, label: Label) -> &Vec<usize> {
        match label {
            Label::Pos => &self.positives,
            Label::Neg => &self.negatives,
        }
    }
}

/// Stalled sampling: the partial set and the number of filter calls spent.
#[derive(Debug, Clone)]
pub struct Stalled {
    pub partial: SampleSet,
    pub calls: u64,
}

impl From<Stalled> for Error {
    fn from(s: Stalled) -> Error {
        Error::SamplingStalled {
            calls: s.calls,
            positives: s.partial.positives.len(),
            negatives: s.partial.negatives.len(),
        }
    }
}

fn check_class_sizes(dataset: &Dataset, q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::Config("q must be >= 1".into()));
    }
    for label in [Label::Pos, Label::Neg] {
        let n = dataset.count(label);
        if n < q {
            return Err(Error::Dataset(alloc::format!(
                "class {} has {n} instances, fewer than q = {q}",
                label.as_i8()
            )));
        }
    }
    Ok(())
}

/// Calls [`filter`] until both sides hold `q` distinct instances or `r_max`
/// calls have been spent. Re-accepted instances are skipped.
pub fn build_sample_set(
    dataset: &Dataset,
    weights: &WeightVector,
    q: usize,
    state: &mut FilterState,
    r_max: u64,
) -> Result<core::result::Result<SampleSet, Stalled>> {
    check_class_sizes(dataset, q)?;
    let mut set = SampleSet::default();
    while !set.is_complete(q) {
        if state.calls() >= r_max {
            return Ok(Err(Stalled {
                partial: set,
                calls: state.calls(),
            }));
        }
        let Some(i) = filter(dataset, weights, state)?.accepted else {
            continue;
        };
        let label = dataset.get(i).label;
        if set.side(label).len() < q && !set.contains(i) {
            set.side_mut(label).push(i);
        }
    }
    Ok(Ok(set))
}

/// Completes a partial set by weighted sampling without replacement inside
/// each starved class, using the class's renormalized weights.
pub fn complete_by_weight(
    dataset: &Dataset,
    weights: &WeightVector,
    q: usize,
    mut partial: SampleSet,
    rng: &mut Rng,
) -> Result<SampleSet> {
    check_class_sizes(dataset, q)?;
    let w = weights.as_slice();
    for label in [Label::Pos, Label::Neg] {
        let taken: BTreeSet<usize> = partial.side(label).iter().copied().collect();
        let mut pool: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.get(i).label == label && !taken.contains(&i))
            .collect();
        while partial.side(label).len() < q {
            let total: f64 = pool.iter().map(|&i| w[i]).sum();
            let pick = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut chosen = pool.len() - 1;
                for (slot, &i) in pool.iter().enumerate() {
                    if u < w[i] {
                        chosen = slot;
                        break;
                    }
                    u -= w[i];
                }
                chosen
            } else {
                rng.random_range(0..pool.len() as u64) as usize
            };
            let i = pool.swap_remove(pick);
            partial.side_mut(label).push(i);
        }
    }
    Ok(partial)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingReport {
    pub filter_calls: u64,
    pub fallback_used: bool,
}

/// One round's sample: the filter loop, with the weighted fallback on stall.
pub fn sample_round(
    dataset: &Dataset,
    weights: &WeightVector,
    q: usize,
    state: &mut FilterState,
    r_max: u64,
) -> Result<(SampleSet, SamplingReport)> {
    match build_sample_set(dataset, weights, q, state, r_max)? {
        Ok(set) => Ok((
            set,
            SamplingReport {
                filter_calls: state.calls(),
                fallback_used: false,
            },
        )),
        Err(stalled) => {
            let calls = stalled.calls;
            let set = complete_by_weight(dataset, weights, q, stalled.partial, state.rng_mut())?;
            Ok((
                set,
                SamplingReport {
                    filter_calls: calls,
                    fallback_used: true,
                },
            ))
        }
    }
}
