//! Adaptive attribute discovery with boosted decision stumps.
//!
//! An attribute oracle (a multimodal LLM in production, a scripted world in
//! tests) proposes yes/no questions that separate two groups of examples and
//! then answers those questions per instance. The boosting loop decides which
//! examples the oracle sees next by resampling hard instances.
//!
//! This crate is `no_std` + `alloc`: it holds the data model, the rejection
//! sampler, the stump learner, the boosting loop and the synthetic oracle.
//! File formats, network backends and the CLI live in the `attriboost` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod boost;
pub mod cache;
pub mod config;
pub mod error;
pub mod learner;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod synth;
pub mod types;

pub use boost::{alpha, predict, predict_many, train, update_weights, Prediction, TrainTrace};
pub use cache::{LabelCache, MemoryCache};
pub use config::{OracleConfig, TrainConfig};
pub use error::{Error, Result};
pub use oracle::{Oracle, OracleBackend, QueryLedger};
pub use types::{
    Answer, AttrId, AttributeDefinition, AttributeMatrix, Dataset, EnsembleModel, Instance, Label,
    Polarity, Round, Stump, WeightVector,
};
