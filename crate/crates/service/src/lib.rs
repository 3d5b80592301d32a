//! Live campaign service: suggest batches, accept measured PICs, persist every
//! step as an append-only event log and serve the JSON API.
//!
//! The service never holds ground truth. Suggestions are computed only from
//! the pool embeddings and the results submitted so far.

pub mod api;
pub mod campaign;
pub mod events;
pub mod http;
pub mod store;

use std::io;

use thiserror::Error;

use spade_core::policy::PolicyError;
use spade_core::{ConfigError, DatasetError};

pub use api::{CampaignSummary, CreateCampaignRequest, SubmitResultsRequest, SuggestRequest, SuggestResponse};
pub use campaign::Campaign;
pub use events::{CampaignEvent, EventKind, EventLog};
pub use http::{router, serve};
pub use store::CampaignStore;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown campaign {0}")]
    UnknownCampaign(String),
    #[error("unknown ligand {0}")]
    UnknownLigand(String),
    #[error("ligand {0} already has a result")]
    DuplicateObservation(String),
    #[error("ligand {ligand_id}: PIC must be finite")]
    NonFinitePic { ligand_id: String },
    #[error("ligand {0} is not in the pending batch (set off_batch to record it anyway)")]
    NotInBatch(String),
    #[error("a batch is awaiting results for {} ligands; submit them or pass override", awaiting.len())]
    PendingBatch { awaiting: Vec<String> },
    #[error("batch size {batch_size} exceeds the pool of {pool} ligands")]
    BatchTooLarge { batch_size: usize, pool: usize },
    #[error("every ligand in the pool has been tested")]
    Exhausted,
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pool(#[from] DatasetError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{path} line {line}: {message}")]
    CorruptLog { path: String, line: usize, message: String },
    #[error("inconsistent event log: {0}")]
    Replay(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ServiceError {
    /// Stable machine-readable code used in error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownCampaign(_) => "unknown_campaign",
            ServiceError::UnknownLigand(_) => "unknown_ligand",
            ServiceError::DuplicateObservation(_) => "duplicate_observation",
            ServiceError::NonFinitePic { .. } => "non_finite_pic",
            ServiceError::NotInBatch(_) => "not_in_batch",
            ServiceError::PendingBatch { .. } => "pending_batch",
            ServiceError::BatchTooLarge { .. } => "batch_too_large",
            ServiceError::Exhausted => "pool_exhausted",
            ServiceError::SchemaVersion(_) => "schema_version",
            ServiceError::InvalidRequest(_) => "invalid_request",
            ServiceError::Config(_) => "invalid_config",
            ServiceError::Pool(_) => "invalid_pool",
            ServiceError::Policy(_) => "policy_failed",
            ServiceError::CorruptLog { .. } => "corrupt_log",
            ServiceError::Replay(_) => "inconsistent_log",
            ServiceError::Io(_) => "io",
        }
    }
}
