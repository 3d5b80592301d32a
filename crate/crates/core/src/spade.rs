//! SPADE batch selection.
//!
//! Each cycle: rank the tested ligands by PIC, take the strongest as positive
//! anchors and the weak tail as negatives, train one robust classifier per
//! anchor, standardize each classifier's scores over the untested ligands and
//! combine them with weights `alpha^pic`.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::policy::{random_batch, top_scoring, CampaignView, HelpCounters, Proposal};
use crate::robust::{solve_gram, SolverReport};
use crate::types::{LinearClassifier, PolicyConfig, Pool, SolverSettings};

#[derive(Debug, Error, PartialEq)]
pub enum SpadeError {
    #[error("no tested ligands to learn from")]
    EmptySeen,
    #[error("no untested ligands to score")]
    EmptyRest,
    #[error("ensemble has no classifiers")]
    NoClassifiers,
}

/// Variances below this are treated as constant scores.
const MIN_VARIANCE: f64 = 1e-12;

/// Sorts `(pool index, pic)` pairs by PIC descending, then ligand id ascending.
pub fn rank_seen(pool: &Pool, seen: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut ranked = seen.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| pool.id(a.0).cmp(pool.id(b.0))));
    ranked
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositiveSet {
    /// `(pool index, pic)`, best first.
    pub members: Vec<(usize, f64)>,
    /// Number of tested ligands with `pic >= p_plus`, regardless of help counts.
    pub m: usize,
    /// Set when no eligible ligand reached `p_plus` and the best eligible one stands in.
    pub fallback: bool,
}

/// Positive anchors from a PIC-ranked list of tested ligands.
///
/// Takes up to `n_max` ligands with `pic >= p_plus` whose help count is below
/// the limit. If there are none, the best eligible tested ligand is used on its
/// own. The result is empty only when every tested ligand is at its limit.
pub fn select_positive_set(
    ranked: &[(usize, f64)],
    p_plus: f64,
    n_max: usize,
    help: &HelpCounters,
    help_limit: Option<usize>,
) -> Result<PositiveSet, SpadeError> {
    if ranked.is_empty() {
        return Err(SpadeError::EmptySeen);
    }
    let m = ranked.iter().filter(|(_, p)| *p >= p_plus).count();
    let members: Vec<(usize, f64)> = ranked
        .iter()
        .filter(|(i, p)| *p >= p_plus && help.eligible(*i, help_limit))
        .take(n_max)
        .copied()
        .collect();
    if !members.is_empty() {
        return Ok(PositiveSet {
            members,
            m,
            fallback: false,
        });
    }
    let best = ranked.iter().find(|(i, _)| help.eligible(*i, help_limit)).copied();
    Ok(PositiveSet {
        members: best.into_iter().collect(),
        m,
        fallback: best.is_some(),
    })
}

/// Number of leading ranks excluded from the negatives: `max(ceil(beta·n), m)`.
pub fn negative_cutoff(n_seen: usize, beta: f64, m: usize) -> usize {
    // The epsilon keeps exact products such as 0.05·100 from rounding up.
    let top = (beta * n_seen as f64 - 1e-9).ceil().max(0.0) as usize;
    top.max(m).min(n_seen)
}

/// Pool indices of the negatives: every ranked ligand past the cutoff that is
/// not itself a positive anchor.
pub fn select_negative_set(
    ranked: &[(usize, f64)],
    beta: f64,
    m: usize,
    positives: &PositiveSet,
) -> Vec<usize> {
    let cut = negative_cutoff(ranked.len(), beta, m);
    ranked[cut..]
        .iter()
        .map(|(i, _)| *i)
        .filter(|i| !positives.members.iter().any(|(p, _)| p == i))
        .collect()
}

/// Population standardization; constant inputs map to zeros.
pub fn standardize(scores: &[f64]) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    if var < MIN_VARIANCE {
        return vec![0.0; scores.len()];
    }
    let sd = var.sqrt();
    scores.iter().map(|s| (s - mean) / sd).collect()
}

/// One trained anchor classifier, expressed on raw (uncentered) embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorClassifier {
    pub anchor: usize,
    pub pic: f64,
    pub classifier: LinearClassifier,
    pub report: SolverReport,
}

/// Trains one classifier per positive anchor against the shared negatives.
///
/// Training runs on pool-demeaned embeddings; the returned classifiers fold
/// the mean into the offset so they score raw rows directly.
pub fn train_classifiers(
    pool: &Pool,
    positives: &[(usize, f64)],
    negatives: &[usize],
    sigma: f64,
    settings: &SolverSettings,
) -> Vec<AnchorClassifier> {
    let n_pos = positives.len();
    let n_neg = negatives.len();
    let union: Vec<usize> = positives.iter().map(|(i, _)| *i).chain(negatives.iter().copied()).collect();
    let full = pool.centered_gram(&union);
    let width = union.len();
    let n = n_neg + 1;

    positives
        .par_iter()
        .enumerate()
        .map(|(a, &(anchor, pic))| {
            // Local order: anchor first, then the negatives.
            let local = |k: usize| if k == 0 { a } else { n_pos + k - 1 };
            let mut gram = vec![0.0; n * n];
            for r in 0..n {
                let src = local(r) * width;
                for c in 0..n {
                    gram[r * n + c] = full[src + local(c)];
                }
            }
            let sol = solve_gram(&gram, n, sigma, settings);
            let mut weights = vec![0.0; pool.dim()];
            let mut coef_sum = 0.0;
            for (k, &b) in sol.coef.iter().enumerate() {
                if b != 0.0 {
                    let row = if k == 0 { anchor } else { negatives[k - 1] };
                    pool.embeddings().add_scaled_row(row, b, &mut weights);
                    coef_sum += b;
                }
            }
            for (w, m) in weights.iter_mut().zip(pool.mean()) {
                *w -= coef_sum * m;
            }
            let shift: f64 = weights.iter().zip(pool.mean()).map(|(w, m)| w * m).sum();
            AnchorClassifier {
                anchor,
                pic,
                classifier: LinearClassifier {
                    offset: sol.offset - shift,
                    weights,
                },
                report: sol.report,
            }
        })
        .collect()
}

/// Ensemble of classifiers prepared for scoring a fixed candidate set.
///
/// Scores are `Σ_i alpha^{p_i} · (r_i - mean_i) / sd_i` where `r_i` are the raw
/// scores of classifier `i` over the candidates. The statistics come from one
/// pass over the candidates; scoring then uses a single combined weight vector.
#[derive(Debug, Clone)]
pub struct EnsembleScorer {
    n_cls: usize,
    /// Feature-major weights, `dim × n_cls`.
    weights_t: Vec<f64>,
    /// Per classifier: `alpha^{p_i} / sd_i`, or zero for constant scores.
    lambda: Vec<f64>,
    means: Vec<f64>,
    combined: Vec<f64>,
    shift: f64,
}

impl EnsembleScorer {
    /// `members` pairs each classifier with the PIC of its anchor.
    pub fn new(
        embeddings: &EmbeddingMatrix,
        members: &[(&LinearClassifier, f64)],
        candidates: &[usize],
        alpha: f64,
    ) -> Result<Self, SpadeError> {
        if members.is_empty() {
            return Err(SpadeError::NoClassifiers);
        }
        if candidates.is_empty() {
            return Err(SpadeError::EmptyRest);
        }
        let n_cls = members.len();
        let dim = embeddings.dim();
        let mut weights_t = vec![0.0; dim * n_cls];
        for (i, (clf, _)) in members.iter().enumerate() {
            for (k, w) in clf.weights.iter().enumerate() {
                weights_t[k * n_cls + i] = *w;
            }
        }

        // Welford over the candidates; offsets cancel under standardization.
        let mut mean = vec![0.0; n_cls];
        let mut m2 = vec![0.0; n_cls];
        let mut raw = vec![0.0; n_cls];
        for (t, &j) in candidates.iter().enumerate() {
            embeddings.multi_dot(j, &weights_t, n_cls, &mut raw);
            let inv = 1.0 / (t + 1) as f64;
            for i in 0..n_cls {
                let delta = raw[i] - mean[i];
                mean[i] += delta * inv;
                m2[i] += delta * (raw[i] - mean[i]);
            }
        }
        let n = candidates.len() as f64;
        let lambda: Vec<f64> = members
            .iter()
            .zip(&m2)
            .map(|((_, pic), m2)| {
                let var = m2 / n;
                if var < MIN_VARIANCE {
                    0.0
                } else {
                    alpha.powf(*pic) / var.sqrt()
                }
            })
            .collect();

        let mut combined = vec![0.0; dim];
        let mut shift = 0.0;
        for (i, (clf, _)) in members.iter().enumerate() {
            if lambda[i] != 0.0 {
                for (c, w) in combined.iter_mut().zip(&clf.weights) {
                    *c += lambda[i] * w;
                }
                shift += lambda[i] * mean[i];
            }
        }
        Ok(EnsembleScorer {
            n_cls,
            weights_t,
            lambda,
            means: mean,
            combined,
            shift,
        })
    }

    pub fn len(&self) -> usize {
        self.n_cls
    }

    pub fn is_empty(&self) -> bool {
        self.n_cls == 0
    }

    #[inline]
    pub fn score(&self, embeddings: &EmbeddingMatrix, j: usize) -> f64 {
        embeddings.dot_weights(j, &self.combined) - self.shift
    }

    pub fn score_all(&self, embeddings: &EmbeddingMatrix, candidates: &[usize]) -> Vec<f64> {
        candidates.iter().map(|&j| self.score(embeddings, j)).collect()
    }

    /// Weighted standardized contribution `alpha^{p_i} · z_i(x_j)` of every classifier.
    pub fn contributions(&self, embeddings: &EmbeddingMatrix, j: usize) -> Vec<f64> {
        let mut raw = vec![0.0; self.n_cls];
        embeddings.multi_dot(j, &self.weights_t, self.n_cls, &mut raw);
        (0..self.n_cls)
            .map(|i| self.lambda[i] * (raw[i] - self.means[i]))
            .collect()
    }
}

/// Ensemble scores of `candidates`, in the same order.
pub fn ensemble_score(
    embeddings: &EmbeddingMatrix,
    members: &[(&LinearClassifier, f64)],
    candidates: &[usize],
    alpha: f64,
) -> Result<Vec<f64>, SpadeError> {
    let scorer = EnsembleScorer::new(embeddings, members, candidates, alpha)?;
    Ok(scorer.score_all(embeddings, candidates))
}

/// Index of the largest contribution; earlier classifiers win ties.
pub fn strongest_contributor(contributions: &[f64]) -> usize {
    let mut best = 0;
    for (i, c) in contributions.iter().enumerate() {
        if *c > contributions[best] {
            best = i;
        }
    }
    best
}

/// Credits each selected ligand to the anchor with the largest weighted
/// contribution. `contributions[j][i]` belongs to batch member `j` and anchor `i`.
pub fn update_help_counters(counters: &mut HelpCounters, anchors: &[usize], contributions: &[Vec<f64>]) {
    let credited: Vec<usize> = contributions
        .iter()
        .map(|c| anchors[strongest_contributor(c)])
        .collect();
    counters.credit(&credited);
}

/// One SPADE cycle. Falls back to a uniformly random batch when there is
/// nothing to learn from: no tested ligands, no eligible anchor, or no negatives.
pub fn propose_batch(
    view: &CampaignView,
    config: &PolicyConfig,
    b: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Proposal, SpadeError> {
    if view.rest.is_empty() {
        return Err(SpadeError::EmptyRest);
    }
    let random = |rng: &mut ChaCha8Rng| Proposal {
        batch: random_batch(view.rest, b, rng),
        credited: Vec::new(),
    };
    if view.seen.is_empty() {
        return Ok(random(rng));
    }
    let ranked = rank_seen(view.pool, view.seen);
    let positives = select_positive_set(&ranked, config.p_plus, config.n_max, view.help, config.help_limit)?;
    if positives.members.is_empty() {
        return Ok(random(rng));
    }
    let negatives = select_negative_set(&ranked, config.beta, positives.m, &positives);
    if negatives.is_empty() {
        return Ok(random(rng));
    }

    let trained = train_classifiers(view.pool, &positives.members, &negatives, config.sigma, &config.solver);
    let members: Vec<(&LinearClassifier, f64)> = trained.iter().map(|t| (&t.classifier, t.pic)).collect();
    let embeddings = view.pool.embeddings();
    let scorer = EnsembleScorer::new(embeddings, &members, view.rest, config.alpha)?;
    let scores = scorer.score_all(embeddings, view.rest);
    let batch = top_scoring(view.pool, view.rest, &scores, b);
    let credited = batch
        .iter()
        .map(|&j| trained[strongest_contributor(&scorer.contributions(embeddings, j))].anchor)
        .collect();
    Ok(Proposal { batch, credited })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Ligand;

    fn pool_of(n: usize) -> Pool {
        let ligands: Vec<Ligand> = (0..n)
            .map(|i| Ligand::new(format!("L{i:03}"), vec![i as f64, (i * i % 7) as f64]))
            .collect();
        Pool::from_ligands(&ligands).unwrap()
    }

    fn ranked(pics: &[f64]) -> (Pool, Vec<(usize, f64)>) {
        let pool = pool_of(pics.len());
        let seen: Vec<(usize, f64)> = pics.iter().copied().enumerate().collect();
        let r = rank_seen(&pool, &seen);
        (pool, r)
    }

    #[test]
    fn positives_by_threshold() {
        let (pool, r) = ranked(&[6.0, 8.1, 7.2]);
        let h = HelpCounters::new(pool.len());
        let p = select_positive_set(&r, 7.0, 20, &h, Some(10)).unwrap();
        assert_eq!(p.members, vec![(1, 8.1), (2, 7.2)]);
        assert_eq!(p.m, 2);
        assert!(!p.fallback);
    }

    #[test]
    fn positives_capped_at_n_max() {
        let pics: Vec<f64> = (0..25).map(|i| 7.0 + i as f64 * 0.1).collect();
        let (pool, r) = ranked(&pics);
        let h = HelpCounters::new(pool.len());
        let p = select_positive_set(&r, 7.0, 20, &h, Some(10)).unwrap();
        assert_eq!(p.members.len(), 20);
        assert_eq!(p.members[0].0, 24);
        assert_eq!(p.members[19].0, 5);
    }

    #[test]
    fn positive_fallback_and_its_removal_from_negatives() {
        let (pool, r) = ranked(&[6.0, 6.5]);
        let h = HelpCounters::new(pool.len());
        let p = select_positive_set(&r, 7.0, 20, &h, Some(10)).unwrap();
        assert_eq!(p.members, vec![(1, 6.5)]);
        assert!(p.fallback);
        assert_eq!(select_negative_set(&r, 0.0, 0, &p), vec![0]);
    }

    #[test]
    fn help_limit_excludes_exhausted_anchor() {
        let (pool, r) = ranked(&[8.0, 7.5, 5.0]);
        let mut h = HelpCounters::new(pool.len());
        h.credit(&[0; 10]);
        let p = select_positive_set(&r, 7.0, 20, &h, Some(10)).unwrap();
        assert_eq!(p.members, vec![(1, 7.5)]);
        assert_eq!(p.m, 2);
        let unlimited = select_positive_set(&r, 7.0, 20, &h, None).unwrap();
        assert_eq!(unlimited.members.len(), 2);
    }

    #[test]
    fn empty_seen_is_an_error() {
        let h = HelpCounters::new(0);
        assert_eq!(select_positive_set(&[], 7.0, 20, &h, None), Err(SpadeError::EmptySeen));
    }

    #[test]
    fn negative_cutoffs() {
        assert_eq!(negative_cutoff(100, 0.05, 2), 5);
        assert_eq!(negative_cutoff(100, 0.05, 30), 30);
        assert_eq!(negative_cutoff(10, 0.0, 0), 0);
        assert_eq!(negative_cutoff(30, 0.05, 0), 2);
    }

    #[test]
    fn negatives_are_ranks_past_cutoff() {
        let pics: Vec<f64> = (0..100).map(|i| 10.0 - i as f64 * 0.05).collect();
        let (pool, r) = ranked(&pics);
        let h = HelpCounters::new(pool.len());
        let p = select_positive_set(&r, 9.92, 20, &h, None).unwrap();
        assert_eq!(p.m, 2);
        let neg = select_negative_set(&r, 0.05, p.m, &p);
        assert_eq!(neg, (5..100).collect::<Vec<_>>());
    }

    #[test]
    fn standardize_examples() {
        let z = standardize(&[1.0, 2.0, 3.0]);
        let e = (1.5f64).sqrt();
        assert!((z[0] + e).abs() < 1e-12 && z[1].abs() < 1e-12 && (z[2] - e).abs() < 1e-12);
        assert_eq!(standardize(&[5.0, 5.0, 5.0]), vec![0.0; 3]);
    }

    #[test]
    fn alpha_weights_scale_contributions() {
        let pool = pool_of(6);
        let clf = LinearClassifier {
            offset: 0.3,
            weights: vec![1.0, -0.5],
        };
        let rest: Vec<usize> = (0..6).collect();
        let scorer = EnsembleScorer::new(pool.embeddings(), &[(&clf, 9.0), (&clf, 7.0)], &rest, 5.0).unwrap();
        let c = scorer.contributions(pool.embeddings(), 4);
        assert!((c[0] / c[1] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn strongest_contributor_breaks_ties_to_first() {
        assert_eq!(strongest_contributor(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(strongest_contributor(&[-1.0, -2.0]), 0);
    }

    #[test]
    fn counters_follow_argmax() {
        let mut h = HelpCounters::new(5);
        update_help_counters(&mut h, &[3, 1], &[vec![0.2, 0.9], vec![1.5, -1.0], vec![0.0, 0.1]]);
        assert_eq!(h.counts(), &[0, 2, 0, 1, 0]);
    }
}
