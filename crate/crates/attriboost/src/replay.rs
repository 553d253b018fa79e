//! Record and replay of oracle traffic.
//!
//! Journal lines are `{request_hash, kind, request, response, backend, ts}`.
//! The hash is SHA-256 over the canonical (key-sorted, compact) JSON of
//! `{"kind": .., "request": ..}`, so it covers the rendered prompt and hence
//! the template text.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use attriboost_core::oracle::{
    BackendError, DefinitionRequest, DefinitionResponse, LabelRequest, LabelResponse,
};
use attriboost_core::OracleBackend;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};
use crate::journal::now_ms;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Define,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub request_hash: String,
    pub kind: Kind,
    pub request: Value,
    pub response: Value,
    pub backend: String,
    pub ts: u64,
}

pub fn request_hash<T: Serialize>(kind: Kind, request: &T) -> String {
    // serde_json::Value keeps object keys sorted, which makes this canonical.
    let doc = serde_json::json!({ "kind": kind, "request": request });
    let bytes = serde_json::to_vec(&doc).expect("requests serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Passes calls through to `inner` and journals every successful exchange.
#[derive(Debug)]
pub struct RecordingBackend<B> {
    inner: B,
    out: Mutex<BufWriter<File>>,
}

impl<B: OracleBackend> RecordingBackend<B> {
    /// Appends to `path`, creating it if needed.
    pub fn new(inner: B, path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| AppError::io(path, e))?;
        Ok(RecordingBackend {
            inner,
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn record<Q: Serialize, R: Serialize>(&self, kind: Kind, request: &Q, response: &R) -> Result<(), BackendError> {
        let rec = ReplayRecord {
            request_hash: request_hash(kind, request),
            kind,
            request: serde_json::to_value(request).expect("requests serialize"),
            response: serde_json::to_value(response).expect("responses serialize"),
            backend: self.inner.id().to_string(),
            ts: now_ms(),
        };
        let mut line = serde_json::to_vec(&rec).expect("records serialize");
        line.push(b'\n');
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        out.write_all(&line)
            .and_then(|_| out.flush())
            .map_err(|e| BackendError::Other(format!("replay journal write failed: {e}")))
    }
}

impl<B: OracleBackend> OracleBackend for RecordingBackend<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn define(&self, request: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
        let resp = self.inner.define(request)?;
        self.record(Kind::Define, request, &resp)?;
        Ok(resp)
    }

    fn label(&self, request: &LabelRequest) -> Result<LabelResponse, BackendError> {
        let resp = self.inner.label(request)?;
        self.record(Kind::Label, request, &resp)?;
        Ok(resp)
    }

    fn label_batch(&self, requests: &[LabelRequest]) -> Vec<Result<LabelResponse, BackendError>> {
        let results = self.inner.label_batch(requests);
        requests
            .iter()
            .zip(results)
            .map(|(req, res)| {
                let resp = res?;
                self.record(Kind::Label, req, &resp)?;
                Ok(resp)
            })
            .collect()
    }
}

/// Serves responses from a journal by request hash. Never touches the network.
#[derive(Debug)]
pub struct ReplayBackend {
    id: String,
    responses: HashMap<String, Value>,
}

impl ReplayBackend {
    pub fn open(path: &Path) -> Result<ReplayBackend> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let mut responses = HashMap::new();
        let mut source = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(line)
                .map_err(|e| AppError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
            source.get_or_insert_with(|| rec.backend.clone());
            responses.entry(rec.request_hash).or_insert(rec.response);
        }
        let id = match source {
            Some(b) => format!("replay:{b}"),
            None => "replay".to_string(),
        };
        Ok(ReplayBackend { id, responses })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    fn lookup<Q: Serialize, R: serde::de::DeserializeOwned>(&self, kind: Kind, request: &Q) -> Result<R, BackendError> {
        let hash = request_hash(kind, request);
        let v = self
            .responses
            .get(&hash)
            .ok_or_else(|| BackendError::ReplayMiss(hash.clone()))?;
        serde_json::from_value(v.clone()).map_err(|e| BackendError::Malformed(format!("journal entry {hash}: {e}")))
    }
}

impl OracleBackend for ReplayBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn define(&self, request: &DefinitionRequest) -> Result<DefinitionResponse, BackendError> {
        self.lookup(Kind::Define, request)
    }

    fn label(&self, request: &LabelRequest) -> Result<LabelResponse, BackendError> {
        self.lookup(Kind::Label, request)
    }
}
