//! HTTP API, command-line front end, case store and evaluation harness for
//! the dxengine diagnostic engine.

pub mod api;
pub mod config;
pub mod diagnose;
pub mod eval;
pub mod snapshot;
pub mod store;

use dxengine_core::inference::InferenceError;
use dxengine_core::nlp::NlpError;
use dxengine_core::pipeline::PipelineError;
use thiserror::Error;

pub use config::AppConfig;
pub use diagnose::{diagnose, diagnose_to_json, CaseInput, DiagnosisResponse};
pub use snapshot::Snapshot;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Nlp(#[from] NlpError),
    #[error("invalid request: {0}")]
    BadInput(String),
    #[error("unsupported content type `{0}`")]
    UnsupportedMedia(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Io(String),
    #[error("cannot bind {addr}: {message}")]
    Bind { addr: String, message: String },
}
