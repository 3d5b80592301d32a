//! Sequential ligand selection for race-to-k drug discovery campaigns.

pub mod analytics;
pub mod baselines;
pub mod data_io;
pub mod embedding;
pub mod gaussian;
pub mod policy;
pub mod robust;
pub mod simulator;
pub mod spade;
pub mod types;

pub use embedding::{BitMatrix, DenseMatrix, EmbeddingKind, EmbeddingMatrix};
pub use policy::{CampaignView, HelpCounters, PolicyKind, Proposal};
pub use simulator::{run_campaign, run_replicates, CampaignState, RunResult};
pub use types::*;
