//! Wall-clock cost of scoring a large pool with a trained ensemble.
//!
//! Scoring is both passes of the ensemble: per-classifier statistics over
//! the pool, then the combined-weight score of every ligand.

use std::time::Instant;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use spade_core::spade::EnsembleScorer;
use spade_core::{BitMatrix, EmbeddingMatrix, LinearClassifier};

use crate::args::ThroughputArgs;

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub ligands: usize,
    pub classifiers: usize,
    pub dim: usize,
    pub density: f64,
    /// Seconds for the statistics pass and weight folding, per repeat.
    pub fit_seconds: Vec<f64>,
    /// Seconds for scoring every ligand, per repeat.
    pub score_seconds: Vec<f64>,
    /// Sum of the scores of the last repeat, printed so the work is observable.
    pub checksum: f64,
}

impl ThroughputReport {
    pub fn totals(&self) -> Vec<f64> {
        self.fit_seconds.iter().zip(&self.score_seconds).map(|(a, b)| a + b).collect()
    }

    pub fn median_total(&self) -> f64 {
        let mut t = self.totals();
        t.sort_by(f64::total_cmp);
        let n = t.len();
        if n % 2 == 1 {
            t[n / 2]
        } else {
            0.5 * (t[n / 2 - 1] + t[n / 2])
        }
    }
}

/// Random fingerprints with independent bits.
pub fn random_fingerprints(rows: usize, dim: usize, density: f64, rng: &mut ChaCha8Rng) -> BitMatrix {
    let wpr = dim.div_ceil(64);
    let tail = dim % 64;
    let mut words = vec![0u64; rows * wpr];
    for row in words.chunks_mut(wpr) {
        if density == 0.5 {
            row.iter_mut().for_each(|w| *w = rng.random());
        } else {
            for k in 0..dim {
                if rng.random_bool(density) {
                    row[k / 64] |= 1 << (k % 64);
                }
            }
        }
        if tail != 0 {
            row[wpr - 1] &= (1u64 << tail) - 1;
        }
    }
    BitMatrix::from_words(rows, dim, words).expect("word count matches shape")
}

/// Classifiers with Gaussian weights and anchor PICs in [7, 10).
pub fn random_ensemble(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<(LinearClassifier, f64)> {
    (0..n)
        .map(|_| {
            let weights = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let clf = LinearClassifier {
                offset: rng.random_range(-1.0..1.0),
                weights,
            };
            (clf, rng.random_range(7.0..10.0))
        })
        .collect()
}

pub fn measure(
    ligands: usize,
    classifiers: usize,
    dim: usize,
    density: f64,
    seed: u64,
    repeats: usize,
) -> anyhow::Result<ThroughputReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emb = EmbeddingMatrix::Binary(random_fingerprints(ligands, dim, density, &mut rng));
    let ensemble = random_ensemble(classifiers, dim, &mut rng);
    let members: Vec<(&LinearClassifier, f64)> = ensemble.iter().map(|(c, p)| (c, *p)).collect();
    let candidates: Vec<usize> = (0..ligands).collect();

    let mut report = ThroughputReport {
        ligands,
        classifiers,
        dim,
        density,
        fit_seconds: Vec::new(),
        score_seconds: Vec::new(),
        checksum: 0.0,
    };
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let scorer = EnsembleScorer::new(&emb, &members, &candidates, 5.0).context("building scorer")?;
        let fitted = Instant::now();
        let scores = scorer.score_all(&emb, &candidates);
        let done = Instant::now();
        report.fit_seconds.push((fitted - start).as_secs_f64());
        report.score_seconds.push((done - fitted).as_secs_f64());
        report.checksum = scores.iter().sum();
    }
    Ok(report)
}

pub fn run(a: &ThroughputArgs) -> anyhow::Result<()> {
    crate::output::init_logging(None);
    tracing::info!(ligands = a.ligands, classifiers = a.classifiers, dim = a.dim, "generating pool");
    // Scoring itself is single-threaded; generation is excluded from the timing.
    let r = measure(a.ligands, a.classifiers, a.dim, a.density, a.seed, a.repeats)?;
    for (i, (f, s)) in r.fit_seconds.iter().zip(&r.score_seconds).enumerate() {
        println!("repeat {i}: statistics {f:.3} s, scoring {s:.3} s, total {:.3} s", f + s);
    }
    println!(
        "scored {} ligands (d={}, density {}) with {} classifiers: median {:.3} s (checksum {:.6e})",
        r.ligands,
        r.dim,
        r.density,
        r.classifiers,
        r.median_total(),
        r.checksum
    );
    if let Some(path) = &a.json {
        let doc = json!({
            "ligands": r.ligands,
            "classifiers": r.classifiers,
            "dim": r.dim,
            "density": r.density,
            "fit_seconds": r.fit_seconds,
            "score_seconds": r.score_seconds,
            "median_total_seconds": r.median_total(),
        });
        std::fs::write(path, serde_json::to_vec_pretty(&doc)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
