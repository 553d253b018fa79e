use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::types::AttrId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CacheError {
    #[error("conflicting rewrite of ({instance_id}, {attr_id})")]
    Conflict { instance_id: String, attr_id: String },
    #[error("cache storage failure: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend: String,
    /// Milliseconds since the Unix epoch, or a logical counter for in-memory caches.
    pub ts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCacheEntry {
    pub instance_id: String,
    pub attr_id: AttrId,
    pub value: bool,
    pub provenance: Provenance,
}

/// Write-once store of oracle answers keyed by (instance id, attribute id).
///
/// Reads take `&self` and may run concurrently; writes take `&mut self`, which
/// makes the single-writer contract a borrow-checker fact.
pub trait LabelCache {
    fn get(&self, instance_id: &str, attr_id: &AttrId) -> Option<bool>;

    /// Rewriting a key with the same value is a no-op; a different value is a conflict.
    fn put(
        &mut self,
        instance_id: &str,
        attr_id: &AttrId,
        value: bool,
        backend: &str,
    ) -> Result<(), CacheError>;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryCache {
    entries: BTreeMap<(String, AttrId), (bool, Provenance)>,
    clock: u64,
}

impl MemoryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, instance_id: &str, attr_id: &AttrId) -> Option<LabelCacheEntry> {
        self.entries
            .get(&(String::from(instance_id), attr_id.clone()))
            .map(|(v, p)| LabelCacheEntry {
                instance_id: instance_id.into(),
                attr_id: attr_id.clone(),
                value: *v,
                provenance: p.clone(),
            })
    }
}

impl LabelCache for MemoryCache {
    fn get(&self, instance_id: &str, attr_id: &AttrId) -> Option<bool> {
        self.entries
            .get(&(String::from(instance_id), attr_id.clone()))
            .map(|(v, _)| *v)
    }

    fn put(
        &mut self,
        instance_id: &str,
        attr_id: &AttrId,
        value: bool,
        backend: &str,
    ) -> Result<(), CacheError> {
        let key = (String::from(instance_id), attr_id.clone());
        if let Some((old, _)) = self.entries.get(&key) {
            return if *old == value {
                Ok(())
            } else {
                Err(CacheError::Conflict {
                    instance_id: key.0,
                    attr_id: key.1.to_string(),
                })
            };
        }
        self.clock += 1;
        self.entries.insert(
            key,
            (
                value,
                Provenance {
                    backend: backend.into(),
                    ts: self.clock,
                },
            ),
        );
        Ok(())
    }
}
