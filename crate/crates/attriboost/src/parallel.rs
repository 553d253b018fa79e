use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use attriboost_core::oracle::{
    BackendError, DefinitionRequest, DefinitionResponse, LabelRequest, LabelResponse,
};
use attriboost_core::OracleBackend;

/// Fans labeling batches out over up to `workers` threads. Results stay
/// index-aligned with the requests, so callers see no ordering difference.
#[derive(Debug)]
pub struct Parallel<B> {
    inner: B,
    workers: usize,
}

impl<B: OracleBackend> Parallel<B> {
    pub fn new(inner: B, workers: usize) -> Self {
        Parallel {
            inner,
            workers: workers.max(1),
        }
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: OracleBackend> OracleBackend for Parallel<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn define(&self, request: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
        self.inner.define(request)
    }

    fn label(&self, request: &LabelRequest) -> Result<LabelResponse, BackendError> {
        self.inner.label(request)
    }

    fn label_batch(&self, requests: &[LabelRequest]) -> Vec<Result<LabelResponse, BackendError>> {
        let workers = self.workers.min(requests.len());
        if workers <= 1 {
            return requests.iter().map(|r| self.inner.label(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<LabelResponse, BackendError>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(req) = requests.get(i) else { break };
                    let res = self.inner.label(req);
                    *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(res);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| {
                m.into_inner()
                    .unwrap_or_else(|p| p.into_inner())
                    .expect("every slot is filled before the scope ends")
            })
            .collect()
    }
}
