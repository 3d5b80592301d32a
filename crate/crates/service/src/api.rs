//! JSON bodies of the HTTP API, schema version 1.
//!
//! Every response carries `schema_version`. Requests may omit it; a request
//! naming a different version is rejected.

use serde::{Deserialize, Serialize};

use spade_core::data_io::parse_hex_bits;
use spade_core::{EmbeddingMatrix, EndpointSpec, PolicyConfig, PolicyKind, Pool};

use crate::ServiceError;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_policy() -> PolicyKind {
    PolicyKind::Spade
}

fn default_endpoints() -> Vec<EndpointSpec> {
    vec![EndpointSpec::average_top10(8.0), EndpointSpec::min_top3(8.0)]
}

/// A packed fingerprint as hex (four bits per digit, first bit most
/// significant) or a dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmbeddingInput {
    Hex(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LigandInput {
    pub id: String,
    pub embedding: EmbeddingInput,
}

/// `POST /campaigns`. The pool carries no PICs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateCampaignRequest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub dim: usize,
    pub ligands: Vec<LigandInput>,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
    #[serde(default)]
    pub config: PolicyConfig,
    #[serde(default = "default_endpoints")]
    pub endpoints: Vec<EndpointSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl CreateCampaignRequest {
    /// Checks the request and builds the candidate pool.
    pub fn validate(&self) -> Result<Pool, ServiceError> {
        check_version(self.schema_version)?;
        self.config.validate()?;
        if self.endpoints.is_empty() {
            return Err(ServiceError::InvalidRequest("at least one endpoint is required".into()));
        }
        for e in &self.endpoints {
            e.validate()?;
        }
        if self.ligands.is_empty() {
            return Err(ServiceError::InvalidRequest("the pool is empty".into()));
        }
        if self.config.batch_size > self.ligands.len() {
            return Err(ServiceError::BatchTooLarge {
                batch_size: self.config.batch_size,
                pool: self.ligands.len(),
            });
        }
        self.build_pool()
    }

    fn build_pool(&self) -> Result<Pool, ServiceError> {
        let d = self.dim;
        let mut rows = Vec::with_capacity(self.ligands.len());
        let mut dense = false;
        for l in &self.ligands {
            let row = match &l.embedding {
                EmbeddingInput::Hex(h) => {
                    let (words, bits) = parse_hex_bits(h)
                        .ok_or_else(|| ServiceError::InvalidRequest(format!("ligand {}: bad hex embedding", l.id)))?;
                    if bits != d.div_ceil(4) * 4 {
                        return Err(ServiceError::InvalidRequest(format!(
                            "ligand {}: hex embedding has {bits} bits, expected {d}",
                            l.id
                        )));
                    }
                    (0..d).map(|k| f64::from((words[k / 64] >> (k % 64)) as u32 & 1)).collect()
                }
                EmbeddingInput::Values(v) => {
                    dense = true;
                    v.clone()
                }
            };
            rows.push(row);
        }
        let ids = self.ligands.iter().map(|l| l.id.clone()).collect();
        for (l, r) in self.ligands.iter().zip(&rows) {
            if r.len() != d {
                return Err(ServiceError::InvalidRequest(format!(
                    "ligand {}: embedding has dimension {}, expected {d}",
                    l.id,
                    r.len()
                )));
            }
        }
        let emb = if dense {
            EmbeddingMatrix::dense_from_rows(&rows, d)
        } else {
            EmbeddingMatrix::from_rows(&rows, d)
        };
        Ok(Pool::new(ids, emb)?)
    }
}

pub fn check_version(v: u32) -> Result<(), ServiceError> {
    if v != SCHEMA_VERSION {
        return Err(ServiceError::SchemaVersion(v));
    }
    Ok(())
}

/// `POST /campaigns/{id}/suggest`. The body is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuggestRequest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Replace a pending batch that already has some results.
    #[serde(default, rename = "override")]
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub schema_version: u32,
    pub campaign_id: String,
    pub cycle: usize,
    pub batch: Vec<String>,
    /// True when the pending batch was returned again without recomputation.
    pub repeated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationInput {
    pub ligand_id: String,
    pub pic: f64,
}

/// `POST /campaigns/{id}/results`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResultsRequest {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub results: Vec<ObservationInput>,
    /// Accept ligands outside the pending batch.
    #[serde(default)]
    pub off_batch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopEntry {
    pub rank: usize,
    pub ligand_id: String,
    pub pic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointProgress {
    pub label: String,
    pub endpoint: EndpointSpec,
    /// Current statistic; absent until `k` ligands are measured.
    pub value: Option<f64>,
    pub reached: bool,
    /// Tests spent when the endpoint was first met.
    pub reached_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingBatch {
    pub cycle: usize,
    pub ligand_ids: Vec<String>,
    /// Members still awaiting a result.
    pub awaiting: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleStatus {
    Pending,
    Complete,
    /// Replaced by an overriding suggestion before all results arrived.
    Superseded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSummary {
    pub cycle: usize,
    pub suggested: Vec<String>,
    pub results: Vec<ObservationInput>,
    pub status: CycleStatus,
}

/// `GET /campaigns/{id}`: everything a dashboard shows, derived from the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub schema_version: u32,
    pub campaign_id: String,
    pub policy: PolicyKind,
    pub config: PolicyConfig,
    pub seed: u64,
    pub pool_size: usize,
    pub seen_count: usize,
    pub remaining: usize,
    pub pending_batch: Option<PendingBatch>,
    pub top: Vec<TopEntry>,
    pub endpoints: Vec<EndpointProgress>,
    pub cycles: Vec<CycleSummary>,
    /// Measurements submitted outside any suggested batch, in order.
    pub off_batch_results: Vec<ObservationInput>,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignList {
    pub schema_version: u32,
    pub campaigns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub schema_version: u32,
    pub error: String,
    pub message: String,
}
