//! JSON-lines dataset manifests: `{"id": .., "media_ref": .., "label": ..}` per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use attriboost_core::{Dataset, Instance, Label};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    media_ref: String,
    #[serde(default)]
    label: Option<i64>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    media_ref: &'a str,
    label: i8,
}

fn records(path: &Path) -> Result<Vec<(usize, Record)>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line)
            .map_err(|e| AppError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push((i + 1, rec));
    }
    if out.is_empty() {
        return Err(AppError::Data(format!("{}: manifest is empty", path.display())));
    }
    Ok(out)
}

fn to_instance(path: &Path, line: usize, rec: Record, placeholder: Option<Label>) -> Result<Instance> {
    let label = match (rec.label, placeholder) {
        (Some(raw), _) => Label::from_raw(raw).ok_or_else(|| {
            AppError::Data(format!("{}:{line}: unknown label value {raw}", path.display()))
        })?,
        (None, Some(l)) => l,
        (None, None) => {
            return Err(AppError::Data(format!("{}:{line}: missing label", path.display())))
        }
    };
    Ok(Instance::new(rec.id, rec.media_ref, label))
}

/// Loads a labeled manifest. Labels 0/1 map to -1/+1; -1/+1 pass through.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let instances = records(path)?
        .into_iter()
        .map(|(line, rec)| to_instance(path, line, rec, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(instances)?)
}

/// Loads a manifest whose labels may be absent. Missing labels are filled
/// with `-1`; prediction never reads them.
pub fn load_unlabeled(path: &Path) -> Result<Dataset> {
    let instances = records(path)?
        .into_iter()
        .map(|(line, rec)| to_instance(path, line, rec, Some(Label::Neg)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::unchecked_labels(instances)?)
}

pub fn write_manifest(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut buf = Vec::new();
    for x in instances {
        let rec = OutRecord {
            id: &x.id,
            media_ref: &x.media_ref,
            label: x.label.as_i8(),
        };
        serde_json::to_writer(&mut buf, &rec).expect("manifest records serialize");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    f.write_all(&buf).map_err(|e| AppError::io(path, e))
}
