//! Selection policies and the state they may read.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, Acquisition, GpError};
use crate::spade::{self, SpadeError};
use crate::types::{PolicyConfig, Pool};

/// Per-ligand count of selections credited to it, indexed like the pool.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HelpCounters {
    counts: Vec<u32>,
}

impl HelpCounters {
    pub fn new(pool_size: usize) -> Self {
        HelpCounters {
            counts: vec![0; pool_size],
        }
    }

    pub fn get(&self, index: usize) -> u32 {
        self.counts[index]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// True when `index` may still act as a positive anchor.
    pub fn eligible(&self, index: usize, limit: Option<usize>) -> bool {
        limit.is_none_or(|l| (self.counts[index] as usize) < l)
    }

    pub fn credit(&mut self, anchors: &[usize]) {
        for &a in anchors {
            self.counts[a] += 1;
        }
    }
}

/// What a policy is allowed to see: embeddings, the tested ligands with their
/// measured PICs, and the untested remainder. Never ground truth.
#[derive(Debug, Clone, Copy)]
pub struct CampaignView<'a> {
    pub pool: &'a Pool,
    /// `(pool index, measured PIC)` in test order.
    pub seen: &'a [(usize, f64)],
    /// Untested pool indices, ascending.
    pub rest: &'a [usize],
    pub help: &'a HelpCounters,
}

/// A proposed batch and, for SPADE, the anchor credited with each member.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Proposal {
    pub batch: Vec<usize>,
    pub credited: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Spade(#[from] SpadeError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("no untested ligands left")]
    Exhausted,
    #[error("unknown policy '{0}' (expected spade, random, gp-m, gp-ucb, gp-ei or gp-pi)")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PolicyKind {
    Spade,
    Random,
    Gp(Acquisition),
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Spade,
        PolicyKind::Random,
        PolicyKind::Gp(Acquisition::Mean),
        PolicyKind::Gp(Acquisition::Ucb),
        PolicyKind::Gp(Acquisition::Ei),
        PolicyKind::Gp(Acquisition::Pi),
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Spade => "spade",
            PolicyKind::Random => "random",
            PolicyKind::Gp(Acquisition::Mean) => "gp-m",
            PolicyKind::Gp(Acquisition::Ucb) => "gp-ucb",
            PolicyKind::Gp(Acquisition::Ei) => "gp-ei",
            PolicyKind::Gp(Acquisition::Pi) => "gp-pi",
        }
    }

    /// Proposes up to `b` untested ligands for the next cycle.
    pub fn propose(
        &self,
        view: &CampaignView,
        config: &PolicyConfig,
        b: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Proposal, PolicyError> {
        if view.rest.is_empty() {
            return Err(PolicyError::Exhausted);
        }
        match self {
            PolicyKind::Spade => Ok(spade::propose_batch(view, config, b, rng)?),
            PolicyKind::Random => Ok(Proposal {
                batch: random_batch(view.rest, b, rng),
                credited: Vec::new(),
            }),
            PolicyKind::Gp(acq) => Ok(Proposal {
                batch: baselines::gp_propose_batch(view, *acq, config.gp_noise, b, rng)?,
                credited: Vec::new(),
            }),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PolicyError::Unknown(s.to_string()))
    }
}

impl From<PolicyKind> for String {
    fn from(k: PolicyKind) -> String {
        k.as_str().to_string()
    }
}

impl TryFrom<String> for PolicyKind {
    type Error = PolicyError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// `b` distinct members of `rest` drawn uniformly, in draw order.
pub fn random_batch(rest: &[usize], b: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let b = b.min(rest.len());
    index::sample(rng, rest.len(), b)
        .into_iter()
        .map(|i| rest[i])
        .collect()
}

/// The `b` entries of `rest` with the highest `scores`, best first.
/// Equal scores are ordered by ligand id ascending.
pub fn top_scoring(pool: &Pool, rest: &[usize], scores: &[f64], b: usize) -> Vec<usize> {
    debug_assert_eq!(rest.len(), scores.len());
    let cmp = |&x: &usize, &y: &usize| {
        scores[y]
            .total_cmp(&scores[x])
            .then_with(|| pool.id(rest[x]).cmp(pool.id(rest[y])))
    };
    let mut order: Vec<usize> = (0..rest.len()).collect();
    let b = b.min(order.len());
    if b < order.len() && b > 0 {
        order.select_nth_unstable_by(b - 1, cmp);
        order.truncate(b);
    }
    order.sort_unstable_by(cmp);
    order.truncate(b);
    order.into_iter().map(|i| rest[i]).collect()
}
