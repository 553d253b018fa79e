//! The attribute oracle: a definition role that turns two unlabeled groups of
//! examples into yes/no questions, and a labeling role that answers all of a
//! round's questions for one instance in a single query.
//!
//! [`OracleBackend`] is the transport (HTTP model, scripted world, replay
//! journal). [`Oracle`] wraps a backend with the request protocol: prompt
//! rendering, response validation, bounded retries, cache-first labeling and
//! query accounting.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cache::LabelCache;
use crate::config::OracleConfig;
use crate::error::{Error, Result};
use crate::sampling::SampleSet;
use crate::types::{AttrId, AttributeDefinition, AttributeMatrix, Dataset, Instance};

pub const DEFINE_TEMPLATE_ID: &str = "define-v1";
pub const DEFINE_TEMPLATE: &str = include_str!("../templates/define_v1.txt");
pub const LABEL_TEMPLATE_ID: &str = "label-v1";
pub const LABEL_TEMPLATE: &str = include_str!("../templates/label_v1.txt");
pub const CORRECTION_TEMPLATE: &str = include_str!("../templates/correction_v1.txt");

/// Replaces `{name}` placeholders. Unknown braces are left alone.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::from(template);
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

/// Tags under which group members are attached, e.g. `A1`, `A2`, ...
pub fn group_tags(group: char, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{group}{i}")).collect()
}

/// Ask for `k` questions separating two groups of media. Carries no class
/// information: group A holds the positives and group B the negatives, but
/// nothing in the request says so.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionRequest {
    pub template: String,
    pub prompt: String,
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
    pub k: usize,
    pub iteration: u32,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionResponse {
    pub questions: Vec<String>,
}

/// Ask every question about one media item in one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub template: String,
    pub prompt: String,
    pub media_ref: String,
    pub questions: Vec<String>,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelResponse {
    pub answers: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("HTTP status {code}: {body}")]
    Status { code: u16, body: String },
    /// The backend answered but the payload did not follow the response schema.
    #[error("unparseable reply: {0}")]
    Malformed(String),
    #[error("replay journal has no entry for request {0}")]
    ReplayMiss(String),
    #[error("media unreadable: {0}")]
    Media(String),
    #[error("{0}")]
    Other(String),
}

impl BackendError {
    /// Worth retrying unchanged.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Timeout(_) => true,
            BackendError::Status { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

pub trait OracleBackend: Send + Sync {
    /// Stable identifier recorded as cache/journal provenance.
    fn id(&self) -> &str;

    fn define(&self, request: &DefinitionRequest) -> Result<DefinitionResponse, BackendError>;

    fn label(&self, request: &LabelRequest) -> Result<LabelResponse, BackendError>;

    /// Labels independent requests; results are index-aligned with `requests`.
    /// Backends that can fan out override this.
    fn label_batch(&self, requests: &[LabelRequest]) -> Vec<Result<LabelResponse, BackendError>> {
        requests.iter().map(|r| self.label(r)).collect()
    }
}

impl<T: OracleBackend + ?Sized> OracleBackend for &T {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn define(&self, request: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
        (**self).define(request)
    }
    fn label(&self, request: &LabelRequest) -> Result<LabelResponse, BackendError> {
        (**self).label(request)
    }
    fn label_batch(&self, requests: &[LabelRequest]) -> Vec<Result<LabelResponse, BackendError>> {
        (**self).label_batch(requests)
    }
}

impl<T: OracleBackend + ?Sized> OracleBackend for Box<T> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn define(&self, request: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
        (**self).define(request)
    }
    fn label(&self, request: &LabelRequest) -> Result<LabelResponse, BackendError> {
        (**self).label(request)
    }
    fn label_batch(&self, requests: &[LabelRequest]) -> Vec<Result<LabelResponse, BackendError>> {
        (**self).label_batch(requests)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationQueries {
    /// 0 stands for inference.
    pub iteration: u32,
    pub define_calls: u64,
    pub label_calls: u64,
    pub cache_hits: u64,
}

/// Query accounting. `define_calls` and `label_calls` count logical queries;
/// `backend_invocations` also counts retries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub define_calls: u64,
    pub label_calls: u64,
    pub cache_hits: u64,
    pub retries: u64,
    pub backend_invocations: u64,
    pub per_iteration: Vec<IterationQueries>,
}

impl QueryLedger {
    fn slot(&mut self, iteration: u32) -> &mut IterationQueries {
        let pos = match self.per_iteration.iter().position(|s| s.iteration == iteration) {
            Some(p) => p,
            None => {
                self.per_iteration.push(IterationQueries {
                    iteration,
                    ..Default::default()
                });
                self.per_iteration.len() - 1
            }
        };
        &mut self.per_iteration[pos]
    }

    pub fn merge(&mut self, other: &QueryLedger) {
        self.define_calls += other.define_calls;
        self.label_calls += other.label_calls;
        self.cache_hits += other.cache_hits;
        self.retries += other.retries;
        self.backend_invocations += other.backend_invocations;
        for s in &other.per_iteration {
            let slot = self.slot(s.iteration);
            slot.define_calls += s.define_calls;
            slot.label_calls += s.label_calls;
            slot.cache_hits += s.cache_hits;
        }
    }
}

/// A backend plus the query protocol around it.
#[derive(Debug)]
pub struct Oracle<B> {
    backend: B,
    config: OracleConfig,
    ledger: QueryLedger,
    iteration: u32,
}

impl<B: OracleBackend> Oracle<B> {
    pub fn new(backend: B, config: OracleConfig) -> Self {
        Oracle {
            backend,
            config,
            ledger: QueryLedger::default(),
            iteration: 0,
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn take_ledger(&mut self) -> QueryLedger {
        core::mem::take(&mut self.ledger)
    }

    pub fn into_parts(self) -> (B, QueryLedger) {
        (self.backend, self.ledger)
    }

    /// Round that subsequent label queries are booked under (0 = inference).
    pub fn set_iteration(&mut self, iteration: u32) {
        self.iteration = iteration;
    }

    /// Calls `f` until it succeeds or a non-transient error / the retry budget stops it.
    fn with_retries<T>(
        &mut self,
        first: Option<Result<T, BackendError>>,
        mut f: impl FnMut(&B) -> Result<T, BackendError>,
    ) -> core::result::Result<T, (BackendError, u32)> {
        let mut result = match first {
            Some(r) => r,
            None => {
                self.ledger.backend_invocations += 1;
                f(&self.backend)
            }
        };
        let mut attempts = 1u32;
        loop {
            match result {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempts <= self.config.max_retries => {
                    self.ledger.retries += 1;
                    self.ledger.backend_invocations += 1;
                    attempts += 1;
                    result = f(&self.backend);
                }
                Err(e) => return Err((e, attempts)),
            }
        }
    }

    /// Asks for `k` questions contrasting the sample's positives (group A)
    /// with its negatives (group B).
    pub fn define_attributes(
        &mut self,
        dataset: &Dataset,
        sample: &SampleSet,
        k: usize,
        iteration: u32,
    ) -> Result<Vec<AttributeDefinition>> {
        if k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if sample.positives.len() != sample.negatives.len() || sample.positives.is_empty() {
            return Err(Error::Invariant(format!(
                "definition needs equal non-empty groups, got {} and {}",
                sample.positives.len(),
                sample.negatives.len()
            )));
        }
        let media = |idx: &[usize]| -> Vec<String> {
            idx.iter().map(|&i| dataset.get(i).media_ref.clone()).collect()
        };
        let group_a = media(&sample.positives);
        let group_b = media(&sample.negatives);
        let k_text = k.to_string();
        let base = render(
            DEFINE_TEMPLATE,
            &[
                ("k", &k_text),
                ("group_a", &group_tags('A', group_a.len()).join(", ")),
                ("group_b", &group_tags('B', group_b.len()).join(", ")),
            ],
        );

        self.ledger.define_calls += 1;
        self.ledger.slot(iteration).define_calls += 1;

        let mut correction: Option<String> = None;
        for attempt in 0..2u32 {
            let mut prompt = base.clone();
            if let Some(reason) = &correction {
                prompt.push_str(&render(CORRECTION_TEMPLATE, &[("reason", reason)]));
            }
            let request = DefinitionRequest {
                template: DEFINE_TEMPLATE_ID.into(),
                prompt,
                group_a: group_a.clone(),
                group_b: group_b.clone(),
                k,
                iteration,
                attempt,
            };
            if attempt > 0 {
                self.ledger.retries += 1;
            }
            let reply = self.with_retries(None, |b| b.define(&request));
            let problem = match reply {
                Ok(resp) => match validate_questions(&resp.questions, k, iteration) {
                    Ok(defs) => return Ok(defs),
                    Err(reason) => reason,
                },
                Err((BackendError::Malformed(reason), _)) => reason,
                Err((source, attempts)) => return Err(Error::Backend { attempts, source }),
            };
            correction = Some(problem);
        }
        Err(Error::MalformedResponse(format!(
            "definition reply still invalid after a corrective retry: {}",
            correction.unwrap_or_default()
        )))
    }

    /// Fills every pending cell of `instances × attrs` in `matrix`, from the
    /// cache where possible and otherwise with one batched query per instance.
    pub fn label_instances(
        &mut self,
        instances: &[Instance],
        attrs: &[AttributeDefinition],
        cache: &mut dyn LabelCache,
        matrix: &mut AttributeMatrix,
    ) -> Result<()> {
        if attrs.is_empty() {
            return Err(Error::Attribute("nothing to label: no attributes".into()));
        }
        let cols: Vec<usize> = attrs.iter().map(|a| matrix.ensure_column(&a.attr_id)).collect();

        struct Pending<'a> {
            row: usize,
            instance: &'a Instance,
            attrs: Vec<(usize, &'a AttributeDefinition)>,
        }
        let mut pending = Vec::new();
        let mut hits = 0u64;
        for inst in instances {
            let row = matrix.row(&inst.id).ok_or_else(|| {
                Error::Dataset(format!("instance {} is not a matrix row", inst.id))
            })?;
            let mut need = Vec::new();
            let mut seen = BTreeMap::new();
            for (a, &c) in attrs.iter().zip(&cols) {
                if seen.insert(c, ()).is_some() || matrix.get(row, c).as_bool().is_some() {
                    continue;
                }
                match cache.get(&inst.id, &a.attr_id) {
                    Some(v) => {
                        matrix.set(row, c, v);
                        hits += 1;
                    }
                    None => need.push((c, a)),
                }
            }
            if !need.is_empty() {
                pending.push(Pending {
                    row,
                    instance: inst,
                    attrs: need,
                });
            }
        }

        let requests: Vec<LabelRequest> = pending
            .iter()
            .map(|p| {
                let questions: Vec<String> = p.attrs.iter().map(|(_, a)| a.question.clone()).collect();
                label_request(&p.instance.media_ref, questions, 0, None)
            })
            .collect();

        let iteration = self.iteration;
        self.ledger.cache_hits += hits;
        self.ledger.label_calls += requests.len() as u64;
        self.ledger.backend_invocations += requests.len() as u64;
        {
            let slot = self.ledger.slot(iteration);
            slot.cache_hits += hits;
            slot.label_calls += requests.len() as u64;
        }

        let first = if requests.is_empty() {
            Vec::new()
        } else {
            self.backend.label_batch(&requests)
        };
        if first.len() != requests.len() {
            return Err(Error::Invariant(format!(
                "backend returned {} results for {} label requests",
                first.len(),
                requests.len()
            )));
        }

        let backend_id = self.backend.id().to_string();
        let mut failure = None;
        for ((p, request), result) in pending.iter().zip(&requests).zip(first) {
            match self.finish_label(request, result) {
                Ok(answers) => {
                    for ((c, a), v) in p.attrs.iter().zip(answers) {
                        cache.put(&p.instance.id, &a.attr_id, v, &backend_id)?;
                        matrix.set(p.row, *c, v);
                    }
                }
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(e);
                    }
                }
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Applies the retry policy to one label query whose first result is known.
    fn finish_label(
        &mut self,
        request: &LabelRequest,
        first: Result<LabelResponse, BackendError>,
    ) -> Result<Vec<bool>> {
        let n = request.questions.len();
        let problem = match self.with_retries(Some(first), |b| b.label(request)) {
            Ok(resp) if resp.answers.len() == n => return Ok(resp.answers),
            Ok(resp) => format!("expected {n} answers, got {}", resp.answers.len()),
            Err((BackendError::Malformed(reason), _)) => reason,
            Err((source, attempts)) => return Err(Error::Backend { attempts, source }),
        };
        let retry = label_request(&request.media_ref, request.questions.clone(), 1, Some(&problem));
        self.ledger.retries += 1;
        match self.with_retries(None, |b| b.label(&retry)) {
            Ok(resp) if resp.answers.len() == n => Ok(resp.answers),
            Ok(resp) => Err(Error::MalformedResponse(format!(
                "label reply for {} still has {} answers for {n} questions",
                request.media_ref,
                resp.answers.len()
            ))),
            Err((BackendError::Malformed(reason), _)) => Err(Error::MalformedResponse(format!(
                "label reply for {}: {reason}",
                request.media_ref
            ))),
            Err((source, attempts)) => Err(Error::Backend { attempts, source }),
        }
    }
}

fn label_request(media_ref: &str, questions: Vec<String>, attempt: u32, correction: Option<&str>) -> LabelRequest {
    let listing: Vec<String> = questions
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{}. {q}", i + 1))
        .collect();
    let n = questions.len().to_string();
    let mut prompt = render(
        LABEL_TEMPLATE,
        &[("n", &n), ("questions", &listing.join("\n"))],
    );
    if let Some(reason) = correction {
        prompt.push_str(&render(CORRECTION_TEMPLATE, &[("reason", reason)]));
    }
    LabelRequest {
        template: LABEL_TEMPLATE_ID.into(),
        prompt,
        media_ref: media_ref.into(),
        questions,
        attempt,
    }
}

/// Exactly `k` distinct yes/no questions, or a reason why not.
pub fn validate_questions(
    questions: &[String],
    k: usize,
    iteration: u32,
) -> core::result::Result<Vec<AttributeDefinition>, String> {
    if questions.len() != k {
        return Err(format!("expected {k} questions, got {}", questions.len()));
    }
    let mut seen: BTreeMap<AttrId, ()> = BTreeMap::new();
    let mut defs = Vec::with_capacity(k);
    for q in questions {
        let def = AttributeDefinition::new(q, iteration).map_err(|e| e.to_string())?;
        if seen.insert(def.attr_id.clone(), ()).is_some() {
            return Err(format!("duplicate question `{}`", def.question));
        }
        defs.push(def);
    }
    Ok(defs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::MemoryCache;
    use crate::types::Label;
    use alloc::vec;
    use core::sync::atomic::{AtomicUsize, Ordering};

    /// Answers from closures and counts invocations.
    struct Fake<D, L> {
        define: D,
        label: L,
        define_calls: AtomicUsize,
        label_calls: AtomicUsize,
    }

    impl<D, L> Fake<D, L>
    where
        D: Fn(&DefinitionRequest) -> Result<DefinitionResponse, BackendError> + Send + Sync,
        L: Fn(&LabelRequest) -> Result<LabelResponse, BackendError> + Send + Sync,
    {
        fn new(define: D, label: L) -> Self {
            Fake {
                define,
                label,
                define_calls: AtomicUsize::new(0),
                label_calls: AtomicUsize::new(0),
            }
        }
    }

    impl<D, L> OracleBackend for Fake<D, L>
    where
        D: Fn(&DefinitionRequest) -> Result<DefinitionResponse, BackendError> + Send + Sync,
        L: Fn(&LabelRequest) -> Result<LabelResponse, BackendError> + Send + Sync,
    {
        fn id(&self) -> &str {
            "fake"
        }
        fn define(&self, r: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
            self.define_calls.fetch_add(1, Ordering::SeqCst);
            (self.define)(r)
        }
        fn label(&self, r: &LabelRequest) -> Result<LabelResponse, BackendError> {
            self.label_calls.fetch_add(1, Ordering::SeqCst);
            (self.label)(r)
        }
    }

    fn questions(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("Is feature {i} audible?")).collect()
    }

    fn data() -> (Dataset, SampleSet) {
        let ds = Dataset::new(vec![
            Instance::new("p", "clips/p.wav", Label::Pos),
            Instance::new("n", "clips/n.wav", Label::Neg),
        ])
        .unwrap();
        let s = SampleSet {
            positives: vec![0],
            negatives: vec![1],
        };
        (ds, s)
    }

    fn no_label(_: &LabelRequest) -> Result<LabelResponse, BackendError> {
        Err(BackendError::Other("unused".into()))
    }

    #[test]
    fn define_groups_without_labels() {
        let (ds, s) = data();
        let fake = Fake::new(
            |r: &DefinitionRequest| {
                assert_eq!(r.group_a, vec!["clips/p.wav".to_string()]);
                assert_eq!(r.group_b, vec!["clips/n.wav".to_string()]);
                assert!(r.prompt.contains("Create 3 attributes that describe the differences between Group A and Group B"));
                Ok(DefinitionResponse { questions: questions(3) })
            },
            no_label,
        );
        let mut o = Oracle::new(&fake, OracleConfig::default());
        let defs = o.define_attributes(&ds, &s, 3, 1).unwrap();
        assert_eq!(defs.len(), 3);
        assert_eq!(o.ledger().define_calls, 1);
        let body = format!("{:?}", DEFINE_TEMPLATE).to_lowercase();
        for word in ["positive", "negative", "label"] {
            assert!(!body.contains(word));
        }
    }

    #[test]
    fn short_definition_gets_one_corrective_retry() {
        let (ds, s) = data();
        let fake = Fake::new(
            |r: &DefinitionRequest| {
                if r.attempt == 1 {
                    assert!(r.prompt.contains("could not be used"));
                }
                Ok(DefinitionResponse { questions: questions(2) })
            },
            no_label,
        );
        let mut o = Oracle::new(&fake, OracleConfig::default());
        let err = o.define_attributes(&ds, &s, 3, 1).unwrap_err();
        assert!(matches!(err, Error::MalformedResponse(_)));
        assert_eq!(fake.define_calls.load(Ordering::SeqCst), 2);
        assert!(err.is_oracle());
    }

    #[test]
    fn corrective_retry_can_recover() {
        let (ds, s) = data();
        let fake = Fake::new(
            |r: &DefinitionRequest| {
                let n = if r.attempt == 0 { 2 } else { 3 };
                Ok(DefinitionResponse { questions: questions(n) })
            },
            no_label,
        );
        let mut o = Oracle::new(&fake, OracleConfig::default());
        assert_eq!(o.define_attributes(&ds, &s, 3, 1).unwrap().len(), 3);
        assert_eq!(o.ledger().define_calls, 1);
        assert_eq!(o.ledger().retries, 1);
    }

    #[test]
    fn duplicate_and_non_questions_are_malformed() {
        assert!(validate_questions(&["Loud?".into(), " loud? ".into()], 2, 1).is_err());
        assert!(validate_questions(&["Loud".into()], 1, 1).is_err());
        assert!(validate_questions(&["Loud?".into()], 2, 1).is_err());
    }

    #[test]
    fn transient_failures_use_retry_budget() {
        let (ds, s) = data();
        let fake = Fake::new(
            |_: &DefinitionRequest| Err(BackendError::Status { code: 503, body: "busy".into() }),
            no_label,
        );
        let cfg = OracleConfig { max_retries: 3, ..Default::default() };
        let mut o = Oracle::new(&fake, cfg);
        let err = o.define_attributes(&ds, &s, 1, 1).unwrap_err();
        assert!(matches!(err, Error::Backend { attempts: 4, .. }));
        assert_eq!(fake.define_calls.load(Ordering::SeqCst), 4);

        let fatal = Fake::new(
            |_: &DefinitionRequest| Err(BackendError::Status { code: 401, body: "no".into() }),
            no_label,
        );
        let mut o = Oracle::new(&fatal, OracleConfig::default());
        assert!(o.define_attributes(&ds, &s, 1, 1).is_err());
        assert_eq!(fatal.define_calls.load(Ordering::SeqCst), 1);
    }

    fn label_all_yes(r: &LabelRequest) -> Result<LabelResponse, BackendError> {
        Ok(LabelResponse { answers: vec![true; r.questions.len()] })
    }

    fn no_define(_: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
        Err(BackendError::Other("unused".into()))
    }

    #[test]
    fn labeling_is_batched_and_cache_first() {
        let (ds, _) = data();
        let attrs: Vec<AttributeDefinition> = questions(4)
            .iter()
            .map(|q| AttributeDefinition::new(q, 1).unwrap())
            .collect();
        let fake = Fake::new(no_define, label_all_yes);
        let mut o = Oracle::new(&fake, OracleConfig::default());
        let mut cache = MemoryCache::new();
        let mut m = AttributeMatrix::for_dataset(&ds);
        o.label_instances(ds.instances(), &attrs, &mut cache, &mut m).unwrap();
        assert_eq!(o.ledger().label_calls, 2);
        assert_eq!(fake.label_calls.load(Ordering::SeqCst), 2);
        assert_eq!(cache.len(), 8);

        // Warm cache, fresh matrix: no queries.
        let mut m2 = AttributeMatrix::for_dataset(&ds);
        o.label_instances(ds.instances(), &attrs, &mut cache, &mut m2).unwrap();
        assert_eq!(o.ledger().label_calls, 2);
        assert_eq!(o.ledger().cache_hits, 8);
        assert_eq!(m, m2);
    }

    #[test]
    fn partially_cached_instance_asks_only_missing_questions() {
        let (ds, _) = data();
        let attrs: Vec<AttributeDefinition> = questions(3)
            .iter()
            .map(|q| AttributeDefinition::new(q, 1).unwrap())
            .collect();
        let mut cache = MemoryCache::new();
        cache.put("p", &attrs[0].attr_id, false, "earlier").unwrap();
        let fake = Fake::new(no_define, |r: &LabelRequest| {
            if r.media_ref == "clips/p.wav" {
                assert_eq!(r.questions.len(), 2);
            }
            label_all_yes(r)
        });
        let mut o = Oracle::new(&fake, OracleConfig::default());
        let mut m = AttributeMatrix::for_dataset(&ds);
        o.label_instances(ds.instances(), &attrs, &mut cache, &mut m).unwrap();
        assert_eq!(o.ledger().label_calls, 2);
        assert_eq!(m.get(0, 0).as_bool(), Some(false));
    }

    #[test]
    fn wrong_answer_count_is_an_error_after_retry() {
        let (ds, _) = data();
        let attrs = vec![AttributeDefinition::new("Loud?", 1).unwrap(), AttributeDefinition::new("Soft?", 1).unwrap()];
        let fake = Fake::new(no_define, |_: &LabelRequest| Ok(LabelResponse { answers: vec![true] }));
        let mut o = Oracle::new(&fake, OracleConfig::default());
        let mut cache = MemoryCache::new();
        let mut m = AttributeMatrix::for_dataset(&ds);
        let err = o.label_instances(ds.instances(), &attrs, &mut cache, &mut m).unwrap_err();
        assert!(matches!(err, Error::MalformedResponse(_)));
        // one initial query plus one corrective retry per instance
        assert_eq!(fake.label_calls.load(Ordering::SeqCst), 4);
        assert!(cache.is_empty());
    }

    #[test]
    fn media_errors_are_not_retried() {
        let (ds, _) = data();
        let attrs = vec![AttributeDefinition::new("Loud?", 1).unwrap()];
        let fake = Fake::new(no_define, |_: &LabelRequest| Err(BackendError::Media("gone".into())));
        let mut o = Oracle::new(&fake, OracleConfig::default());
        let mut m = AttributeMatrix::for_dataset(&ds);
        let err = o
            .label_instances(ds.instances(), &attrs, &mut MemoryCache::new(), &mut m)
            .unwrap_err();
        assert!(matches!(err, Error::Backend { attempts: 1, .. }));
        assert_eq!(fake.label_calls.load(Ordering::SeqCst), 2);
    }
}
