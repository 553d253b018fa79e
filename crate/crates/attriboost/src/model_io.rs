//! Model, trace and ledger documents.
//!
//! Floats are written with 17 significant digits and parsed with correct
//! rounding, so every f64 survives a save/load cycle bit for bit.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use attriboost_core::boost::TRACE_SCHEMA_VERSION;
use attriboost_core::{AttrId, AttributeDefinition, EnsembleModel, Round, TrainConfig, TrainTrace};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{AppError, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    rounds: Vec<Round>,
    attributes: Vec<AttributeDefinition>,
    config: TrainConfig,
}

#[derive(Deserialize)]
struct Versioned {
    schema_version: u32,
}

/// Pretty JSON whose floats carry 17 significant digits (`1.2345678901234567e-1`).
struct Float17<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for Float17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Float17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("documents serialize to memory");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)).map_err(|e| AppError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}

pub fn model_to_json(model: &EnsembleModel) -> Vec<u8> {
    to_json(&ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        rounds: model.rounds().to_vec(),
        attributes: model.attributes().to_vec(),
        config: model.config().clone(),
    })
}

pub fn model_from_json(bytes: &[u8]) -> Result<EnsembleModel> {
    let version: Versioned =
        serde_json::from_slice(bytes).map_err(|e| AppError::Data(format!("model: {e}")))?;
    if version.schema_version != MODEL_SCHEMA_VERSION {
        return Err(AppError::Data(format!(
            "model schema_version {} is not supported (expected {MODEL_SCHEMA_VERSION})",
            version.schema_version
        )));
    }
    let file: ModelFile = serde_json::from_slice(bytes).map_err(|e| AppError::Data(format!("model: {e}")))?;
    for a in &file.attributes {
        if a.attr_id != AttrId::for_question(&a.question) {
            return Err(AppError::Data(format!(
                "model: attribute {} does not match its question text",
                a.attr_id
            )));
        }
    }
    Ok(EnsembleModel::new(file.rounds, file.attributes, file.config)?)
}

pub fn save_model(model: &EnsembleModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(model)).map_err(|e| AppError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<EnsembleModel> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    model_from_json(&bytes).map_err(|e| match e {
        AppError::Data(msg) => AppError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn load_trace(path: &Path) -> Result<TrainTrace> {
    let trace: TrainTrace = read_json(path)?;
    if trace.schema_version != TRACE_SCHEMA_VERSION {
        return Err(AppError::Data(format!(
            "{}: trace schema_version {} is not supported",
            path.display(),
            trace.schema_version
        )));
    }
    Ok(trace)
}
