#![allow(dead_code)]

use spade_core::data_io::{format_hex_bits, generate_synthetic, SyntheticConfig};
use spade_core::{Dataset, EmbeddingMatrix, EndpointSpec, PolicyConfig, PolicyKind};
use spade_service::api::{EmbeddingInput, LigandInput, ObservationInput, SubmitResultsRequest, SCHEMA_VERSION};
use spade_service::CreateCampaignRequest;

pub fn synthetic(ligands: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        protein_id: format!("svc{seed}"),
        ligands,
        dim: 256,
        bit_density: 0.05,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

/// Pool of `ds` without its PICs.
pub fn request(ds: &Dataset, policy: PolicyKind, config: PolicyConfig, endpoints: Vec<EndpointSpec>, seed: u64) -> CreateCampaignRequest {
    let pool = ds.pool();
    let EmbeddingMatrix::Binary(bits) = pool.embeddings() else {
        panic!("synthetic pools are binary");
    };
    CreateCampaignRequest {
        schema_version: SCHEMA_VERSION,
        dim: pool.dim(),
        ligands: (0..pool.len())
            .map(|i| LigandInput {
                id: pool.id(i).to_string(),
                embedding: EmbeddingInput::Hex(format_hex_bits(bits.row(i), pool.dim())),
            })
            .collect(),
        policy,
        config,
        endpoints,
        seed,
    }
}

/// Results for `batch` looked up in the ground truth, as a lab would report them.
pub fn lab_results(ds: &Dataset, batch: &[String]) -> SubmitResultsRequest {
    SubmitResultsRequest {
        schema_version: SCHEMA_VERSION,
        results: batch
            .iter()
            .map(|id| ObservationInput {
                ligand_id: id.clone(),
                pic: ds.pic_of(id).unwrap(),
            })
            .collect(),
        off_batch: false,
    }
}
