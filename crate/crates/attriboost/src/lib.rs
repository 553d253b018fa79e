//! File formats, oracle backends and the command layer of attriboost.
//!
//! The algorithm lives in [`attriboost_core`]; this crate adds JSON-lines
//! manifests, the journal label cache, model files, the HTTP, recording and
//! replay backends, run configuration and the experiment runner.

pub mod backend;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod http;
pub mod journal;
pub mod manifest;
pub mod model_io;
pub mod parallel;
pub mod replay;

pub use attriboost_core as core;
pub use error::{AppError, Result};
