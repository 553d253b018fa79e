//! Synthetic worlds with a scripted oracle.
//!
//! Each instance has `D` hidden binary properties drawn uniformly at random;
//! its label is +1 iff at least `θ` of the rule's properties are set. The
//! scripted oracle phrases questions about hidden properties, ranks properties
//! by how differently they occur in the two groups it is shown, and answers
//! questions from the hidden bits with seeded flip noise `η`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{
    BackendError, DefinitionRequest, DefinitionResponse, LabelRequest, LabelResponse, OracleBackend,
};
use crate::rng;
use crate::types::{normalize_question, Dataset, Instance, Label};

const MAX_DIMS: usize = 64;
const BALANCE_ATTEMPTS: u64 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthWorld {
    pub dims: usize,
    pub rule_dims: Vec<usize>,
    pub threshold: usize,
    pub eta: f64,
    pub seed: u64,
}

impl SynthWorld {
    pub fn new(dims: usize, rule_dims: Vec<usize>, threshold: usize, eta: f64, seed: u64) -> Result<Self> {
        let w = SynthWorld {
            dims,
            rule_dims,
            threshold,
            eta,
            seed,
        };
        w.validate()?;
        Ok(w)
    }

    /// One hidden property that is the label.
    pub fn perfect(seed: u64) -> SynthWorld {
        SynthWorld::new(1, alloc::vec![0], 1, 0.0, seed).expect("valid")
    }

    /// Eight properties; the label is the majority of the first three.
    pub fn majority_of_three(eta: f64, seed: u64) -> Result<SynthWorld> {
        SynthWorld::new(8, alloc::vec![0, 1, 2], 2, eta, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.dims > MAX_DIMS {
            return Err(Error::Config(format!("dims must be in 1..={MAX_DIMS}")));
        }
        if self.rule_dims.is_empty() {
            return Err(Error::Config("label rule needs at least one dim".into()));
        }
        let mut seen = [false; MAX_DIMS];
        for &d in &self.rule_dims {
            if d >= self.dims || seen[d] {
                return Err(Error::Config(format!("bad rule dim {d}")));
            }
            seen[d] = true;
        }
        if self.threshold == 0 || self.threshold > self.rule_dims.len() {
            return Err(Error::Config("threshold must be in 1..=|rule dims|".into()));
        }
        if !(self.eta >= 0.0 && self.eta < 0.5) {
            return Err(Error::Config(format!(
                "flip noise must lie in [0, 0.5), got {}",
                self.eta
            )));
        }
        Ok(())
    }

    pub fn label_of(&self, bits: u64) -> Label {
        let on = self.rule_dims.iter().filter(|&&d| bits >> d & 1 == 1).count();
        if on >= self.threshold {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    fn mask(&self) -> u64 {
        if self.dims == 64 {
            u64::MAX
        } else {
            (1u64 << self.dims) - 1
        }
    }
}

/// Generates one dataset of `n` instances and the oracle bound to it.
pub fn generate(world: &SynthWorld, n: usize) -> Result<(Dataset, ScriptedBackend)> {
    let (mut sets, backend) = generate_split(world, &[n])?;
    Ok((sets.remove(0), backend))
}

/// Generates disjoint datasets (e.g. train and test) sharing one oracle.
/// Each split is redrawn until its positive rate is within 0.4..=0.6.
pub fn generate_split(world: &SynthWorld, sizes: &[usize]) -> Result<(Vec<Dataset>, ScriptedBackend)> {
    world.validate()?;
    let mut bits = BTreeMap::new();
    let mut sets = Vec::with_capacity(sizes.len());
    for (split, &n) in sizes.iter().enumerate() {
        if n < 4 {
            return Err(Error::Config(format!("split {split} needs n >= 4, got {n}")));
        }
        let mut drawn = None;
        for attempt in 0..BALANCE_ATTEMPTS {
            let mut r = rng::stream(world.seed, "world", (split as u64) << 32 | attempt);
            let hidden: Vec<u64> = (0..n).map(|_| r.random::<u64>() & world.mask()).collect();
            let pos = hidden.iter().filter(|&&b| world.label_of(b) == Label::Pos).count();
            let rate = pos as f64 / n as f64;
            if (rate - 0.5).abs() <= 0.1 + 1e-12 && pos > 0 && pos < n {
                drawn = Some(hidden);
                break;
            }
        }
        let hidden = drawn.ok_or_else(|| {
            Error::Dataset(format!(
                "could not draw a balanced split of {n} after {BALANCE_ATTEMPTS} attempts"
            ))
        })?;
        let mut instances = Vec::with_capacity(n);
        for (i, b) in hidden.into_iter().enumerate() {
            let id = format!("s{split}-{i:05}");
            let media_ref = format!("synth://{id}");
            bits.insert(media_ref.clone(), b);
            instances.push(Instance::new(id, media_ref, world.label_of(b)));
        }
        sets.push(Dataset::new(instances)?);
    }
    Ok((
        sets,
        ScriptedBackend {
            world: world.clone(),
            bits,
        },
    ))
}

const PHRASES: [&str; 8] = [
    "Is hidden property {d} present in the clip?",
    "Does the recording exhibit hidden property {d}?",
    "Can hidden property {d} be heard in this audio?",
    "Is there evidence of hidden property {d}?",
    "Does hidden property {d} occur in the sample?",
    "Is hidden property {d} detectable here?",
    "Would a listener notice hidden property {d}?",
    "Does the audio contain hidden property {d}?",
];

fn phrase(dim: usize, variant: usize) -> String {
    let base = PHRASES[variant % PHRASES.len()].replace("{d}", &dim.to_string());
    let round = variant / PHRASES.len();
    if round == 0 {
        base
    } else {
        format!("{} (form {round})?", base.trim_end_matches('?'))
    }
}

/// Hidden property a scripted question is about.
pub fn question_dim(question: &str) -> Option<usize> {
    let q = normalize_question(question);
    let at = q.find("hidden property ")? + "hidden property ".len();
    let digits: String = q[at..].chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

/// Deterministic oracle answering from the hidden bits of a [`SynthWorld`].
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    world: SynthWorld,
    bits: BTreeMap<String, u64>,
}

impl ScriptedBackend {
    pub fn world(&self) -> &SynthWorld {
        &self.world
    }

    pub fn hidden_bits(&self, media_ref: &str) -> Option<u64> {
        self.bits.get(media_ref).copied()
    }

    fn lookup(&self, media_ref: &str) -> Result<u64, BackendError> {
        self.hidden_bits(media_ref)
            .ok_or_else(|| BackendError::Media(format!("unknown synthetic media {media_ref}")))
    }

    /// Dims ordered by how unevenly they occur in the two groups.
    fn rank_dims(&self, a: &[u64], b: &[u64]) -> Vec<usize> {
        let mut scored: Vec<(i64, usize)> = (0..self.world.dims)
            .map(|d| {
                let ca = a.iter().filter(|&&x| x >> d & 1 == 1).count() as i64;
                let cb = b.iter().filter(|&&x| x >> d & 1 == 1).count() as i64;
                // |ca/|a| − cb/|b|| scaled by |a|·|b| to stay in integers
                ((ca * b.len() as i64 - cb * a.len() as i64).abs(), d)
            })
            .collect();
        scored.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        scored.into_iter().map(|(_, d)| d).collect()
    }
}

impl OracleBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "scripted"
    }

    fn define(&self, request: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
        let a = request
            .group_a
            .iter()
            .map(|m| self.lookup(m))
            .collect::<Result<Vec<_>, _>>()?;
        let b = request
            .group_b
            .iter()
            .map(|m| self.lookup(m))
            .collect::<Result<Vec<_>, _>>()?;
        let ranked = self.rank_dims(&a, &b);
        let used = request.k.min(self.world.dims);
        let mut r = rng::stream(self.world.seed, "define", request.iteration as u64);
        let offsets: Vec<usize> = (0..self.world.dims)
            .map(|_| r.random_range(0..PHRASES.len() as u64) as usize)
            .collect();
        let questions = (0..request.k)
            .map(|slot| {
                let dim = ranked[slot % used];
                let variant = slot / used;
                phrase(dim, offsets[dim] + variant)
            })
            .collect();
        Ok(DefinitionResponse { questions })
    }

    fn label(&self, request: &LabelRequest) -> Result<LabelResponse, BackendError> {
        let bits = self.lookup(&request.media_ref)?;
        let answers = request
            .questions
            .iter()
            .map(|q| {
                let d = question_dim(q)
                    .filter(|&d| d < self.world.dims)
                    .ok_or_else(|| BackendError::Other(format!("scripted world cannot answer `{q}`")))?;
                let truth = bits >> d & 1 == 1;
                let key = normalize_question(q);
                let u = rng::unit_hash(
                    self.world.seed,
                    &[b"noise", request.media_ref.as_bytes(), key.as_bytes()],
                );
                Ok(truth ^ (u < self.world.eta))
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        Ok(LabelResponse { answers })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::validate_questions;
    use alloc::vec;

    fn define_req(a: Vec<String>, b: Vec<String>, k: usize, iteration: u32) -> DefinitionRequest {
        DefinitionRequest {
            template: "t".into(),
            prompt: String::new(),
            group_a: a,
            group_b: b,
            k,
            iteration,
            attempt: 0,
        }
    }

    #[test]
    fn perfect_world_labels_equal_bit() {
        let world = SynthWorld::perfect(4);
        let (ds, oracle) = generate(&world, 50).unwrap();
        for inst in ds.instances() {
            let bit = oracle.hidden_bits(&inst.media_ref).unwrap() & 1 == 1;
            assert_eq!(inst.label == Label::Pos, bit);
        }
        let pos = ds.count(Label::Pos) as f64 / 50.0;
        assert!((0.4..=0.6).contains(&pos));
    }

    #[test]
    fn rejects_coin_flip_noise() {
        assert!(SynthWorld::new(8, vec![0, 1, 2], 2, 0.5, 0).is_err());
        assert!(SynthWorld::new(8, vec![0, 8], 1, 0.0, 0).is_err());
        assert!(SynthWorld::new(8, vec![0, 0], 1, 0.0, 0).is_err());
        assert!(SynthWorld::new(8, vec![0, 1], 3, 0.0, 0).is_err());
        assert!(generate(&SynthWorld::perfect(0), 3).is_err());
    }

    #[test]
    fn majority_of_three_best_single_stump_is_three_quarters() {
        // Exhaustive over all 2^8 patterns, independent of the learner.
        let world = SynthWorld::majority_of_three(0.0, 0).unwrap();
        let mut best = 0.0f64;
        for d in 0..8 {
            for polarity in [true, false] {
                let correct = (0u64..256)
                    .filter(|&x| {
                        let vote = (x >> d & 1 == 1) == polarity;
                        vote == (world.label_of(x) == Label::Pos)
                    })
                    .count();
                let acc = correct as f64 / 256.0;
                if d < 3 && polarity {
                    assert_eq!(acc, 0.75);
                }
                if d >= 3 {
                    assert_eq!(acc, 0.5);
                }
                best = best.max(acc);
            }
        }
        assert_eq!(best, 0.75);
    }

    #[test]
    fn definitions_are_valid_and_deterministic() {
        let world = SynthWorld::majority_of_three(0.1, 9).unwrap();
        let (ds, oracle) = generate(&world, 40).unwrap();
        let pos: Vec<String> = ds.instances().iter().filter(|i| i.label == Label::Pos).take(5).map(|i| i.media_ref.clone()).collect();
        let neg: Vec<String> = ds.instances().iter().filter(|i| i.label == Label::Neg).take(5).map(|i| i.media_ref.clone()).collect();
        for k in [1, 3, 8, 10, 30] {
            let req = define_req(pos.clone(), neg.clone(), k, 2);
            let a = oracle.define(&req).unwrap();
            assert_eq!(a, oracle.define(&req).unwrap());
            validate_questions(&a.questions, k, 2).unwrap();
            for q in &a.questions {
                assert!(question_dim(q).unwrap() < 8);
            }
        }
        let first = oracle.define(&define_req(pos.clone(), neg.clone(), 10, 1)).unwrap();
        let second = oracle.define(&define_req(pos, neg, 10, 2)).unwrap();
        assert_ne!(first, second);
    }

    #[test]
    fn top_ranked_dim_separates_groups() {
        let world = SynthWorld::new(4, vec![2], 1, 0.0, 1).unwrap();
        let (ds, oracle) = generate(&world, 40).unwrap();
        let pick = |y: Label| -> Vec<String> {
            ds.instances().iter().filter(|i| i.label == y).take(6).map(|i| i.media_ref.clone()).collect()
        };
        let resp = oracle.define(&define_req(pick(Label::Pos), pick(Label::Neg), 1, 1)).unwrap();
        assert_eq!(question_dim(&resp.questions[0]), Some(2));
    }

    #[test]
    fn noise_rate_is_respected() {
        let world = SynthWorld::new(1, vec![0], 1, 0.2, 5).unwrap();
        let (ds, oracle) = generate(&world, 2000).unwrap();
        let mut flips = 0;
        for inst in ds.instances() {
            let req = LabelRequest {
                template: "t".into(),
                prompt: String::new(),
                media_ref: inst.media_ref.clone(),
                questions: vec![phrase(0, 0)],
                attempt: 0,
            };
            let ans = oracle.label(&req).unwrap().answers[0];
            assert_eq!(ans, oracle.label(&req).unwrap().answers[0]);
            if ans != (inst.label == Label::Pos) {
                flips += 1;
            }
        }
        let rate = flips as f64 / 2000.0;
        assert!((rate - 0.2).abs() < 0.03, "{rate}");
    }

    #[test]
    fn phrases_parse_back() {
        for d in [0, 7, 12] {
            for v in 0..20 {
                assert_eq!(question_dim(&phrase(d, v)), Some(d));
                assert!(phrase(d, v).ends_with('?'));
            }
        }
    }
}
