//! Shared domain vocabulary: ligands, pools, datasets, classifiers and configs.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingKind, EmbeddingMatrix};

/// A candidate molecule, known only through its embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ligand {
    pub id: String,
    pub embedding: Vec<f64>,
}

impl Ligand {
    pub fn new(id: impl Into<String>, embedding: Vec<f64>) -> Self {
        Ligand {
            id: id.into(),
            embedding,
        }
    }
}

/// A measured pIC50 for one ligand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ligand_id: String,
    pub pic: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("ligand {id}: embedding has dimension {found}, expected {expected}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate ligand id {0}")]
    DuplicateId(String),
    #[error("ligand {0} has no PIC")]
    MissingPic(String),
    #[error("ligand {id} has non-finite PIC {value}")]
    NonFinitePic { id: String, value: f64 },
    #[error("ligand {0} has a non-finite embedding value")]
    NonFiniteEmbedding(String),
    #[error("{ids} ids but {rows} embedding rows")]
    ShapeMismatch { ids: usize, rows: usize },
}

/// The candidate set `A`: ids plus embeddings, with the centering statistics
/// that every per-cycle computation shares.
#[derive(Debug, Clone)]
pub struct Pool {
    ids: Vec<String>,
    embeddings: EmbeddingMatrix,
    index: HashMap<String, usize>,
    mean: Vec<f64>,
    mean_dot: Vec<f64>,
    mean_sq_norm: f64,
}

impl Pool {
    pub fn new(ids: Vec<String>, embeddings: EmbeddingMatrix) -> Result<Self, DatasetError> {
        if ids.len() != embeddings.rows() {
            return Err(DatasetError::ShapeMismatch {
                ids: ids.len(),
                rows: embeddings.rows(),
            });
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(DatasetError::DuplicateId(id.clone()));
            }
        }
        if let EmbeddingMatrix::Dense(m) = &embeddings {
            if let Some(bad) = (0..m.rows()).find(|&i| m.row(i).iter().any(|v| !v.is_finite())) {
                return Err(DatasetError::NonFiniteEmbedding(ids[bad].clone()));
            }
        }
        let mean = embeddings.column_means();
        let mean_dot = (0..embeddings.rows())
            .map(|i| embeddings.dot_weights(i, &mean))
            .collect();
        let mean_sq_norm = mean.iter().map(|v| v * v).sum();
        Ok(Pool {
            ids,
            embeddings,
            index,
            mean,
            mean_dot,
            mean_sq_norm,
        })
    }

    /// Builds a pool from individual ligands, checking ids, dimensions and finiteness.
    pub fn from_ligands(ligands: &[Ligand]) -> Result<Self, DatasetError> {
        let dim = ligands.first().map_or(0, |l| l.embedding.len());
        let mut seen = HashSet::with_capacity(ligands.len());
        for l in ligands {
            if l.embedding.len() != dim {
                return Err(DatasetError::DimensionMismatch {
                    id: l.id.clone(),
                    expected: dim,
                    found: l.embedding.len(),
                });
            }
            if !seen.insert(l.id.as_str()) {
                return Err(DatasetError::DuplicateId(l.id.clone()));
            }
            if l.embedding.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFiniteEmbedding(l.id.clone()));
            }
        }
        let rows: Vec<Vec<f64>> = ligands.iter().map(|l| l.embedding.clone()).collect();
        let ids = ligands.iter().map(|l| l.id.clone()).collect();
        Pool::new(ids, EmbeddingMatrix::from_rows(&rows, dim))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.embeddings.kind()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn ligand(&self, i: usize) -> Ligand {
        Ligand::new(self.ids[i].clone(), self.embeddings.row_vec(i))
    }

    /// Column means over the whole pool (the centering point for training).
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Inner product of two demeaned rows.
    #[inline]
    pub fn centered_dot(&self, i: usize, j: usize) -> f64 {
        self.embeddings.dot(i, j) - self.mean_dot[i] - self.mean_dot[j] + self.mean_sq_norm
    }

    /// Row-major Gram matrix of the demeaned rows listed in `indices`.
    pub fn centered_gram(&self, indices: &[usize]) -> Vec<f64> {
        let n = indices.len();
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = self.centered_dot(indices[a], indices[b]);
                g[a * n + b] = v;
                g[b * n + a] = v;
            }
        }
        g
    }

    /// Demeaned copy of row `i`.
    pub fn centered_row(&self, i: usize) -> Vec<f64> {
        let mut v = self.embeddings.row_vec(i);
        for (x, m) in v.iter_mut().zip(&self.mean) {
            *x -= m;
        }
        v
    }
}

/// A pool together with its hidden ground-truth PICs.
#[derive(Debug, Clone)]
pub struct Dataset {
    protein_id: String,
    pool: Arc<Pool>,
    pics: Vec<f64>,
}

impl Dataset {
    /// `pics[i]` is the ground truth of pool row `i`.
    pub fn from_parts(
        protein_id: impl Into<String>,
        pool: Pool,
        pics: Vec<f64>,
    ) -> Result<Self, DatasetError> {
        if pics.len() != pool.len() {
            return Err(DatasetError::ShapeMismatch {
                ids: pool.len(),
                rows: pics.len(),
            });
        }
        if let Some(i) = pics.iter().position(|p| !p.is_finite()) {
            return Err(DatasetError::NonFinitePic {
                id: pool.id(i).to_string(),
                value: pics[i],
            });
        }
        Ok(Dataset {
            protein_id: protein_id.into(),
            pool: Arc::new(pool),
            pics,
        })
    }

    pub fn protein_id(&self) -> &str {
        &self.protein_id
    }

    pub fn pool(&self) -> &Arc<Pool> {
        &self.pool
    }

    pub fn pics(&self) -> &[f64] {
        &self.pics
    }

    pub fn pic(&self, i: usize) -> f64 {
        self.pics[i]
    }

    pub fn len(&self) -> usize {
        self.pics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pics.is_empty()
    }

    pub fn pic_of(&self, id: &str) -> Option<f64> {
        self.pool.index_of(id).map(|i| self.pics[i])
    }
}

/// Checks every dataset invariant and packs the embeddings.
///
/// Errors name the offending ligand.
pub fn validate_dataset(
    protein_id: &str,
    ligands: &[Ligand],
    pics: &HashMap<String, f64>,
) -> Result<Dataset, DatasetError> {
    let pool = Pool::from_ligands(ligands)?;
    let mut values = Vec::with_capacity(ligands.len());
    for l in ligands {
        match pics.get(&l.id) {
            None => return Err(DatasetError::MissingPic(l.id.clone())),
            Some(&p) if !p.is_finite() => {
                return Err(DatasetError::NonFinitePic {
                    id: l.id.clone(),
                    value: p,
                })
            }
            Some(&p) => values.push(p),
        }
    }
    Dataset::from_parts(protein_id, pool, values)
}

/// Affine scorer `c + w·x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub offset: f64,
    pub weights: Vec<f64>,
}

impl LinearClassifier {
    pub fn zeros(dim: usize) -> Self {
        LinearClassifier {
            offset: 0.0,
            weights: vec![0.0; dim],
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.offset + crate::embedding::dot(&self.weights, x)
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Stop once the objective drops by less than this over `window` iterations.
    pub tolerance: f64,
    pub window: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 2000,
            tolerance: 1e-7,
            window: 10,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("sigma must be finite and non-negative, got {0}")]
    Sigma(f64),
    #[error("alpha must be >= 1, got {0}")]
    Alpha(f64),
    #[error("beta must lie in [0, 1), got {0}")]
    Beta(f64),
    #[error("n_max must be positive")]
    NMax,
    #[error("batch size must be positive")]
    BatchSize,
    #[error("p_plus must be finite")]
    PPlus,
    #[error("gp noise variance must be positive, got {0}")]
    GpNoise(f64),
    #[error("endpoint k must be at least 1")]
    EndpointK,
    #[error("endpoint target must be finite")]
    EndpointTarget,
}

/// Hyperparameters for SPADE and the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Robustness width. Zero switches the robust term off.
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n_max: usize,
    pub p_plus: f64,
    pub batch_size: usize,
    /// `None` removes the limit.
    pub help_limit: Option<usize>,
    pub solver: SolverSettings,
    pub gp_noise: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            sigma: 1.0,
            alpha: 5.0,
            beta: 0.05,
            n_max: 20,
            p_plus: 7.0,
            batch_size: 10,
            help_limit: Some(10),
            solver: SolverSettings::default(),
            gp_noise: 0.1,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(ConfigError::Sigma(self.sigma));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(ConfigError::Beta(self.beta));
        }
        if self.n_max == 0 {
            return Err(ConfigError::NMax);
        }
        if self.batch_size == 0 {
            return Err(ConfigError::BatchSize);
        }
        if !self.p_plus.is_finite() {
            return Err(ConfigError::PPlus);
        }
        if !(self.gp_noise > 0.0 && self.gp_noise.is_finite()) {
            return Err(ConfigError::GpNoise(self.gp_noise));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    AverageTopK,
    MinTopK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointSpec {
    pub kind: EndpointKind,
    pub k: usize,
    pub target: f64,
}

impl EndpointSpec {
    pub fn average_top10(target: f64) -> Self {
        EndpointSpec {
            kind: EndpointKind::AverageTopK,
            k: 10,
            target,
        }
    }

    pub fn min_top3(target: f64) -> Self {
        EndpointSpec {
            kind: EndpointKind::MinTopK,
            k: 3,
            target,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(ConfigError::EndpointK);
        }
        if !self.target.is_finite() {
            return Err(ConfigError::EndpointTarget);
        }
        Ok(())
    }

    /// Short label used in reports, e.g. `avg10` or `min3`.
    pub fn label(&self) -> String {
        match self.kind {
            EndpointKind::AverageTopK => format!("avg{}", self.k),
            EndpointKind::MinTopK => format!("min{}", self.k),
        }
    }
}
