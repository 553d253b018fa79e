//! Append-only JSON-lines label cache, compacted when opened.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use attriboost_core::cache::{CacheError, LabelCacheEntry, Provenance};
use attriboost_core::{AttrId, LabelCache};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    instance_id: String,
    attr_id: AttrId,
    value: bool,
    backend: String,
    ts: u64,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub entries: usize,
    pub instances: usize,
    pub attributes: usize,
    pub yes: usize,
    pub backends: BTreeMap<String, usize>,
}

#[derive(Debug)]
pub struct JournalCache {
    path: PathBuf,
    entries: BTreeMap<(String, AttrId), (bool, Provenance)>,
    writer: BufWriter<File>,
    /// Lines dropped while opening (a torn final write).
    recovered: usize,
}

impl JournalCache {
    /// Opens or creates the journal, folds duplicate lines, and rewrites it
    /// in key order. A torn final line from an interrupted write is dropped;
    /// corruption anywhere else, or two different values for one key, is an error.
    pub fn open(path: &Path) -> Result<JournalCache> {
        let mut entries = BTreeMap::new();
        let mut recovered = 0;
        if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
            let lines: Vec<&str> = text.split('\n').collect();
            for (i, raw) in lines.iter().enumerate() {
                if raw.trim().is_empty() {
                    continue;
                }
                let line: Line = match serde_json::from_str(raw) {
                    Ok(l) => l,
                    Err(_) if i + 1 == lines.len() => {
                        recovered += 1;
                        continue;
                    }
                    Err(e) => {
                        return Err(AppError::Data(format!(
                            "{}:{}: corrupt cache line: {e}",
                            path.display(),
                            i + 1
                        )))
                    }
                };
                insert(&mut entries, line)?;
            }
        }
        compact(path, &entries)?;
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| AppError::io(path, e))?;
        Ok(JournalCache {
            path: path.to_path_buf(),
            entries,
            writer: BufWriter::new(file),
            recovered,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn recovered_lines(&self) -> usize {
        self.recovered
    }

    pub fn entry(&self, instance_id: &str, attr_id: &AttrId) -> Option<LabelCacheEntry> {
        self.entries
            .get(&(instance_id.to_string(), attr_id.clone()))
            .map(|(value, provenance)| LabelCacheEntry {
                instance_id: instance_id.to_string(),
                attr_id: attr_id.clone(),
                value: *value,
                provenance: provenance.clone(),
            })
    }

    pub fn stats(&self) -> CacheStats {
        let mut stats = CacheStats {
            entries: self.entries.len(),
            ..CacheStats::default()
        };
        let mut instances = std::collections::BTreeSet::new();
        let mut attrs = std::collections::BTreeSet::new();
        for ((inst, attr), (value, prov)) in &self.entries {
            instances.insert(inst.as_str());
            attrs.insert(attr);
            stats.yes += usize::from(*value);
            *stats.backends.entry(prov.backend.clone()).or_default() += 1;
        }
        stats.instances = instances.len();
        stats.attributes = attrs.len();
        stats
    }
}

fn insert(entries: &mut BTreeMap<(String, AttrId), (bool, Provenance)>, line: Line) -> Result<()> {
    let key = (line.instance_id, line.attr_id);
    match entries.get(&key) {
        Some((v, _)) if *v != line.value => Err(AppError::Core(
            CacheError::Conflict {
                instance_id: key.0,
                attr_id: key.1.to_string(),
            }
            .into(),
        )),
        Some(_) => Ok(()),
        None => {
            entries.insert(
                key,
                (
                    line.value,
                    Provenance {
                        backend: line.backend,
                        ts: line.ts,
                    },
                ),
            );
            Ok(())
        }
    }
}

fn compact(path: &Path, entries: &BTreeMap<(String, AttrId), (bool, Provenance)>) -> Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    let mut out = BufWriter::new(File::create(&tmp).map_err(|e| AppError::io(&tmp, e))?);
    for ((instance_id, attr_id), (value, prov)) in entries {
        write_line(&mut out, instance_id, attr_id, *value, &prov.backend, prov.ts)
            .map_err(|e| AppError::io(&tmp, e))?;
    }
    let file = out.into_inner().map_err(|e| AppError::io(&tmp, e.into_error()))?;
    file.sync_all().map_err(|e| AppError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AppError::io(path, e))
}

fn write_line(
    out: &mut impl Write,
    instance_id: &str,
    attr_id: &AttrId,
    value: bool,
    backend: &str,
    ts: u64,
) -> std::io::Result<()> {
    let line = Line {
        instance_id: instance_id.to_string(),
        attr_id: attr_id.clone(),
        value,
        backend: backend.to_string(),
        ts,
    };
    serde_json::to_writer(&mut *out, &line)?;
    out.write_all(b"\n")
}

impl LabelCache for JournalCache {
    fn get(&self, instance_id: &str, attr_id: &AttrId) -> Option<bool> {
        self.entries
            .get(&(instance_id.to_string(), attr_id.clone()))
            .map(|(v, _)| *v)
    }

    fn put(&mut self, instance_id: &str, attr_id: &AttrId, value: bool, backend: &str) -> Result<(), CacheError> {
        let key = (instance_id.to_string(), attr_id.clone());
        if let Some((v, _)) = self.entries.get(&key) {
            if *v == value {
                return Ok(());
            }
            return Err(CacheError::Conflict {
                instance_id: key.0,
                attr_id: key.1.to_string(),
            });
        }
        let ts = now_ms();
        write_line(&mut self.writer, instance_id, attr_id, value, backend, ts)
            .and_then(|_| self.writer.flush())
            .map_err(|e| CacheError::Io(e.to_string()))?;
        self.entries.insert(
            key,
            (
                value,
                Provenance {
                    backend: backend.to_string(),
                    ts,
                },
            ),
        );
        Ok(())
    }
}
