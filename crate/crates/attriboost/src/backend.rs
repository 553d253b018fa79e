//! Builds the configured oracle backend.

use std::path::{Path, PathBuf};

use attriboost_core::config::BackendKind;
use attriboost_core::synth::{generate_split, ScriptedBackend, SynthWorld};
use attriboost_core::{Dataset, OracleBackend, OracleConfig};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::http::HttpBackend;
use crate::model_io::{read_json, write_json};
use crate::parallel::Parallel;
use crate::replay::{RecordingBackend, ReplayBackend};

/// A synthetic world together with the split sizes it was generated with;
/// regenerating from it reproduces every instance and hidden bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub world: SynthWorld,
    pub sizes: Vec<usize>,
}

impl WorldFile {
    pub fn load(path: &Path) -> Result<WorldFile> {
        let wf: WorldFile = read_json(path)?;
        wf.world.validate().map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        Ok(wf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn realize(&self) -> Result<(Vec<Dataset>, ScriptedBackend)> {
        Ok(generate_split(&self.world, &self.sizes)?)
    }
}

fn path_of(field: &Option<String>, what: &str) -> Result<PathBuf> {
    field
        .as_deref()
        .map(PathBuf::from)
        .ok_or_else(|| AppError::Config(format!("oracle.{what} is required for this backend")))
}

/// Scripted, HTTP (recording to `oracle.journal` when set) or replay backend,
/// fanned out over `oracle.parallelism` workers.
pub fn build_backend(cfg: &OracleConfig) -> Result<Box<dyn OracleBackend>> {
    let base: Box<dyn OracleBackend> = match cfg.backend {
        BackendKind::Scripted => {
            let (_, backend) = WorldFile::load(&path_of(&cfg.world, "world")?)?.realize()?;
            Box::new(backend)
        }
        BackendKind::Http => {
            let http = Parallel::new(HttpBackend::new(cfg)?, cfg.parallelism);
            match &cfg.journal {
                Some(j) => return Ok(Box::new(RecordingBackend::new(http, Path::new(j))?)),
                None => return Ok(Box::new(http)),
            }
        }
        BackendKind::Replay => Box::new(ReplayBackend::open(&path_of(&cfg.journal, "journal")?)?),
    };
    Ok(Box::new(Parallel::new(base, cfg.parallelism)))
}
