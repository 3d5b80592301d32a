//! Gaussian-process baselines with mean, UCB, EI and PI acquisition.
//!
//! Binary fingerprints use the Tanimoto kernel, dense embeddings a
//! unit-lengthscale squared-exponential kernel. Targets are centered by their
//! mean; the noise variance is fixed.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingKind, EmbeddingMatrix};
use crate::gaussian;
use crate::policy::{random_batch, top_scoring, CampaignView};

#[derive(Debug, Error, PartialEq)]
pub enum GpError {
    #[error("kernel matrix not positive definite even with jitter {0}")]
    NotPositiveDefinite(f64),
    #[error("{inputs} training inputs but {targets} targets")]
    Shape { inputs: usize, targets: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acquisition {
    Mean,
    Ucb,
    Ei,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Tanimoto,
    SquaredExponential,
}

impl KernelKind {
    pub fn for_embedding(kind: EmbeddingKind) -> Self {
        match kind {
            EmbeddingKind::Binary => KernelKind::Tanimoto,
            EmbeddingKind::Dense => KernelKind::SquaredExponential,
        }
    }
}

const MAX_JITTER: f64 = 1e-2;

/// `<x,y> / (<x,x> + <y,y> - <x,y>)`; zero when both vectors are zero.
pub fn tanimoto_kernel(x: &[f64], y: &[f64]) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    tanimoto_from_products(xy, xx, yy)
}

#[inline]
fn tanimoto_from_products(xy: f64, xx: f64, yy: f64) -> f64 {
    let denom = xx + yy - xy;
    if denom <= 0.0 {
        0.0
    } else {
        xy / denom
    }
}

/// `exp(-|x - y|² / 2)`.
pub fn squared_exponential_kernel(x: &[f64], y: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-0.5 * d2).exp()
}

/// Kernel between two rows of the same embedding matrix.
#[inline]
pub fn kernel_rows(emb: &EmbeddingMatrix, kind: KernelKind, i: usize, j: usize) -> f64 {
    let xy = emb.dot(i, j);
    let xx = emb.sq_norm(i);
    let yy = emb.sq_norm(j);
    match kind {
        KernelKind::Tanimoto => tanimoto_from_products(xy, xx, yy),
        KernelKind::SquaredExponential => (-0.5 * (xx + yy - 2.0 * xy).max(0.0)).exp(),
    }
}

/// Acquisition value from a posterior mean and standard deviation.
pub fn acquisition(mean: f64, std: f64, best_seen: f64, kind: Acquisition) -> f64 {
    match kind {
        Acquisition::Mean => mean,
        Acquisition::Ucb => mean + std,
        Acquisition::Ei => {
            if std <= 0.0 {
                (mean - best_seen).max(0.0)
            } else {
                let z = (mean - best_seen) / std;
                (mean - best_seen) * gaussian::cdf(z) + std * gaussian::pdf(z)
            }
        }
        Acquisition::Pi => {
            if std <= 0.0 {
                if mean > best_seen {
                    1.0
                } else {
                    0.0
                }
            } else {
                gaussian::cdf((mean - best_seen) / std)
            }
        }
    }
}

/// A GP fitted on rows of an embedding matrix.
#[derive(Debug, Clone)]
pub struct GpModel<'a> {
    emb: &'a EmbeddingMatrix,
    kernel: KernelKind,
    train: Vec<usize>,
    offset: f64,
    noise: f64,
    /// Lower Cholesky factor of `K + (noise + jitter)·I`.
    chol: Option<DMatrix<f64>>,
    weights: DVector<f64>,
    jitter: f64,
}

impl<'a> GpModel<'a> {
    pub fn fit(
        emb: &'a EmbeddingMatrix,
        kernel: KernelKind,
        train: &[usize],
        targets: &[f64],
        noise: f64,
    ) -> Result<Self, GpError> {
        if train.len() != targets.len() {
            return Err(GpError::Shape {
                inputs: train.len(),
                targets: targets.len(),
            });
        }
        let n = train.len();
        if n == 0 {
            return Ok(GpModel {
                emb,
                kernel,
                train: Vec::new(),
                offset: 0.0,
                noise,
                chol: None,
                weights: DVector::zeros(0),
                jitter: 0.0,
            });
        }
        let offset = targets.iter().sum::<f64>() / n as f64;
        let k = DMatrix::from_fn(n, n, |r, c| kernel_rows(emb, kernel, train[r], train[c]));
        let y = DVector::from_iterator(n, targets.iter().map(|t| t - offset));

        let mut jitter = 0.0;
        let chol = loop {
            let mut m = k.clone();
            for i in 0..n {
                m[(i, i)] += noise + jitter;
            }
            if let Some(c) = m.cholesky() {
                break c;
            }
            jitter = if jitter == 0.0 { 1e-8 } else { jitter * 10.0 };
            if jitter > MAX_JITTER {
                return Err(GpError::NotPositiveDefinite(jitter / 10.0));
            }
        };
        let weights = chol.solve(&y);
        Ok(GpModel {
            emb,
            kernel,
            train: train.to_vec(),
            offset,
            noise,
            chol: Some(chol.unpack()),
            weights,
            jitter,
        })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior predictive mean and variance (observation noise included) at
    /// each of `test`. Variances are skipped, and returned empty, unless requested.
    pub fn posterior(&self, test: &[usize], with_variance: bool) -> (Vec<f64>, Vec<f64>) {
        let prior_var = |j: usize| kernel_rows(self.emb, self.kernel, j, j) + self.noise;
        let Some(l) = &self.chol else {
            let mean = vec![self.offset; test.len()];
            let var = if with_variance {
                test.iter().map(|&j| prior_var(j)).collect()
            } else {
                Vec::new()
            };
            return (mean, var);
        };
        let n = self.train.len();
        let mut mean = Vec::with_capacity(test.len());
        let mut var = Vec::with_capacity(if with_variance { test.len() } else { 0 });
        const CHUNK: usize = 512;
        for block in test.chunks(CHUNK) {
            let ks = DMatrix::from_fn(n, block.len(), |r, c| {
                kernel_rows(self.emb, self.kernel, self.train[r], block[c])
            });
            for c in 0..block.len() {
                mean.push(self.offset + ks.column(c).dot(&self.weights));
            }
            if with_variance {
                let v = l
                    .solve_lower_triangular(&ks)
                    .expect("Cholesky factor has a positive diagonal");
                for (c, &j) in block.iter().enumerate() {
                    var.push((prior_var(j) - v.column(c).norm_squared()).max(0.0));
                }
            }
        }
        (mean, var)
    }
}

/// Refits on the tested ligands and returns the `b` best untested ligands by
/// acquisition value. The first cycle is random, drawn exactly as for SPADE.
pub fn gp_propose_batch(
    view: &CampaignView,
    acq: Acquisition,
    noise: f64,
    b: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, GpError> {
    if view.seen.is_empty() {
        return Ok(random_batch(view.rest, b, rng));
    }
    let emb = view.pool.embeddings();
    let train: Vec<usize> = view.seen.iter().map(|(i, _)| *i).collect();
    let targets: Vec<f64> = view.seen.iter().map(|(_, p)| *p).collect();
    let model = GpModel::fit(emb, KernelKind::for_embedding(emb.kind()), &train, &targets, noise)?;
    let need_var = acq != Acquisition::Mean;
    let (mean, var) = model.posterior(view.rest, need_var);
    let best = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scores: Vec<f64> = (0..mean.len())
        .map(|i| {
            let std = if need_var { var[i].sqrt() } else { 0.0 };
            acquisition(mean[i], std, best, acq)
        })
        .collect();
    Ok(top_scoring(view.pool, view.rest, &scores, b))
}
