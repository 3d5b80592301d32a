//! Summary statistics over campaign results: median MLT, paired sign tests,
//! percent lift and failure rates, plus the CSV and text reports built on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::PolicyKind;
use crate::simulator::RunResult;
use crate::types::{EndpointKind, EndpointSpec};

pub const DEFAULT_LEVEL: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("paired lists differ in length ({0} vs {1})")]
    Unpaired(usize, usize),
    #[error("cannot take the median of an empty list")]
    Empty,
    #[error("CSV output failed: {0}")]
    Csv(String),
}

/// Median with the lower-median convention for even counts.
pub fn median_mlt(values: &[f64]) -> Result<f64, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v[(v.len() - 1) / 2])
}

/// `P(X >= k)` for `X ~ Binomial(n, 1/2)`.
///
/// Exact integer arithmetic up to `n = 127`; log-space summation beyond.
pub fn binomial_upper_tail(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if n <= 127 {
        // Pascal row n; every entry and the row sum 2^n fit in u128.
        let mut row: Vec<u128> = vec![1];
        for _ in 0..n {
            let mut next = vec![1u128; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        let total: u128 = row[k as usize..].iter().sum();
        return total as f64 / 2f64.powi(n as i32);
    }
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let ln_choose = |i: u64| {
        libm::lgamma(n as f64 + 1.0) - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0)
    };
    let terms: Vec<f64> = (k..=n).map(|i| ln_choose(i) - ln_half_n).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()).exp().min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    A,
    B,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::A => "A",
            Verdict::B => "B",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadToHead {
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub p_value_a: f64,
    pub p_value_b: f64,
    pub verdict: Verdict,
}

/// Paired one-sided sign test: fewer ligands-to-target wins, ties are dropped.
pub fn head_to_head(ltt_a: &[usize], ltt_b: &[usize], level: f64) -> Result<HeadToHead, AnalyticsError> {
    if ltt_a.len() != ltt_b.len() {
        return Err(AnalyticsError::Unpaired(ltt_a.len(), ltt_b.len()));
    }
    let (mut wins_a, mut wins_b, mut ties) = (0, 0, 0);
    for (a, b) in ltt_a.iter().zip(ltt_b) {
        match a.cmp(b) {
            std::cmp::Ordering::Less => wins_a += 1,
            std::cmp::Ordering::Greater => wins_b += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = (wins_a + wins_b) as u64;
    let (p_value_a, p_value_b) = if n == 0 {
        (1.0, 1.0)
    } else {
        (binomial_upper_tail(n, wins_a as u64), binomial_upper_tail(n, wins_b as u64))
    };
    let verdict = if p_value_a < level {
        Verdict::A
    } else if p_value_b < level {
        Verdict::B
    } else {
        Verdict::Inconclusive
    };
    Ok(HeadToHead {
        wins_a,
        wins_b,
        ties,
        p_value_a,
        p_value_b,
        verdict,
    })
}

/// Relative MLT improvement of SPADE over another method, in percent.
pub fn percent_lift(mlt_spade: f64, mlt_other: f64) -> f64 {
    100.0 * (mlt_other - mlt_spade) / mlt_other
}

pub fn failure_rate(result: &RunResult) -> f64 {
    if result.failed.is_empty() {
        return 0.0;
    }
    result.failures() as f64 / result.failed.len() as f64
}

/// Counts of values in `[lo + i·w, lo + (i+1)·w)`; the last bin is closed.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    let w = (hi - lo) / bins as f64;
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let b = (((v - lo) / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Identifies one endpoint setting. Targets are keyed in hundredths so
/// the key is totally ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct EndpointKey {
    kind: u8,
    k: usize,
    target_centi: i64,
}

impl EndpointKey {
    fn of(e: &EndpointSpec) -> Self {
        EndpointKey {
            kind: match e.kind {
                EndpointKind::AverageTopK => 0,
                EndpointKind::MinTopK => 1,
            },
            k: e.k,
            target_centi: (e.target * 100.0).round() as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct H2hRow {
    pub protein_id: String,
    pub endpoint: EndpointSpec,
    pub policy_a: PolicyKind,
    pub policy_b: PolicyKind,
    pub result: HeadToHead,
}

/// Rendered report files.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub report_csv: String,
    pub h2h_csv: String,
    /// Median MLT per policy and endpoint across proteins.
    pub median_csv: String,
    /// Significant head-to-head verdicts per policy pair and endpoint.
    pub wins_csv: String,
    /// Median percent lift of SPADE over proteins with a significant verdict.
    pub lift_csv: String,
    pub summary: String,
    pub h2h: Vec<H2hRow>,
}

fn fmt_target(t: f64) -> String {
    format!("{t:.2}")
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String, AnalyticsError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).map_err(|e| AnalyticsError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| AnalyticsError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| AnalyticsError::Csv(e.to_string()))
}

/// Builds `report.csv`, `h2h.csv` and a text summary from a set of results.
///
/// Output depends only on the result values, never on their input order.
/// Head-to-head rows pair every two policies on the same protein and endpoint.
pub fn emit_report(results: &[RunResult], level: f64) -> Result<Report, AnalyticsError> {
    let mut sorted: Vec<&RunResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        (a.protein_id.as_str(), EndpointKey::of(&a.endpoint), a.policy.as_str(), a.batch_size).cmp(&(
            b.protein_id.as_str(),
            EndpointKey::of(&b.endpoint),
            b.policy.as_str(),
            b.batch_size,
        ))
    });

    let mut rows = vec![[
        "protein_id",
        "policy",
        "endpoint",
        "target",
        "batch_size",
        "reps",
        "mlt",
        "failures",
        "failure_rate",
    ]
    .map(String::from)
    .to_vec()];
    for r in &sorted {
        rows.push(vec![
            r.protein_id.clone(),
            r.policy.to_string(),
            r.endpoint.label(),
            fmt_target(r.endpoint.target),
            r.batch_size.to_string(),
            r.ligands_to_target.len().to_string(),
            format!("{:.4}", r.mlt()),
            r.failures().to_string(),
            format!("{:.4}", failure_rate(r)),
        ]);
    }
    let report_csv = csv_string(rows)?;

    // (endpoint, protein) -> policy -> result
    let mut groups: BTreeMap<(EndpointKey, &str), BTreeMap<&str, &RunResult>> = BTreeMap::new();
    let mut endpoints: BTreeMap<EndpointKey, EndpointSpec> = BTreeMap::new();
    let mut policies: BTreeSet<PolicyKind> = BTreeSet::new();
    for r in &sorted {
        let key = EndpointKey::of(&r.endpoint);
        endpoints.insert(key, r.endpoint);
        policies.insert(r.policy);
        groups
            .entry((key, r.protein_id.as_str()))
            .or_default()
            .insert(r.policy.as_str(), r);
    }
    let policies: Vec<PolicyKind> = ordered_policies(policies);

    let mut h2h = Vec::new();
    for ((_, protein), by_policy) in &groups {
        for (i, pa) in policies.iter().enumerate() {
            for pb in &policies[i + 1..] {
                let (Some(a), Some(b)) = (by_policy.get(pa.as_str()), by_policy.get(pb.as_str())) else {
                    continue;
                };
                let result = head_to_head(&a.ligands_to_target, &b.ligands_to_target, level)?;
                h2h.push(H2hRow {
                    protein_id: protein.to_string(),
                    endpoint: a.endpoint,
                    policy_a: *pa,
                    policy_b: *pb,
                    result,
                });
            }
        }
    }
    let mut rows = vec![[
        "protein_id",
        "endpoint",
        "target",
        "policy_a",
        "policy_b",
        "wins_a",
        "wins_b",
        "ties",
        "p_value_a",
        "p_value_b",
        "verdict",
    ]
    .map(String::from)
    .to_vec()];
    for h in &h2h {
        rows.push(vec![
            h.protein_id.clone(),
            h.endpoint.label(),
            fmt_target(h.endpoint.target),
            h.policy_a.to_string(),
            h.policy_b.to_string(),
            h.result.wins_a.to_string(),
            h.result.wins_b.to_string(),
            h.result.ties.to_string(),
            format!("{:.6e}", h.result.p_value_a),
            format!("{:.6e}", h.result.p_value_b),
            match h.result.verdict {
                Verdict::A => h.policy_a.to_string(),
                Verdict::B => h.policy_b.to_string(),
                Verdict::Inconclusive => "inconclusive".to_string(),
            },
        ]);
    }
    let h2h_csv = csv_string(rows)?;

    let summary = summary_text(&groups, &endpoints, &policies, &h2h, level);
    let (median_csv, wins_csv, lift_csv) = summary_tables(&groups, &endpoints, &policies, &h2h)?;
    Ok(Report {
        report_csv,
        h2h_csv,
        median_csv,
        wins_csv,
        lift_csv,
        summary,
        h2h,
    })
}

/// SPADE first, then the rest in their canonical order.
fn ordered_policies(set: BTreeSet<PolicyKind>) -> Vec<PolicyKind> {
    PolicyKind::ALL.into_iter().filter(|p| set.contains(p)).collect()
}

type Groups<'a> = BTreeMap<(EndpointKey, &'a str), BTreeMap<&'a str, &'a RunResult>>;

fn per_protein_mlts(groups: &Groups, key: &EndpointKey, policy: &PolicyKind) -> Vec<f64> {
    groups
        .iter()
        .filter(|((k, _), _)| k == key)
        .filter_map(|(_, by)| by.get(policy.as_str()).map(|r| r.mlt()))
        .collect()
}

/// Lifts of SPADE over `other` on proteins where the sign test was conclusive.
fn significant_lifts(groups: &Groups, h2h: &[H2hRow], key: &EndpointKey, other: &PolicyKind) -> Vec<f64> {
    h2h.iter()
        .filter(|h| {
            EndpointKey::of(&h.endpoint) == *key
                && h.policy_a == PolicyKind::Spade
                && h.policy_b == *other
                && h.result.verdict != Verdict::Inconclusive
        })
        .filter_map(|h| {
            let by = groups.get(&(*key, h.protein_id.as_str()))?;
            Some(percent_lift(by.get("spade")?.mlt(), by.get(other.as_str())?.mlt()))
        })
        .collect()
}

fn summary_tables(
    groups: &Groups,
    endpoints: &BTreeMap<EndpointKey, EndpointSpec>,
    policies: &[PolicyKind],
    h2h: &[H2hRow],
) -> Result<(String, String, String), AnalyticsError> {
    let opt = |v: Result<f64, AnalyticsError>| v.map(|m| format!("{m:.4}")).unwrap_or_default();

    let mut median = vec![["policy", "endpoint", "target", "proteins", "median_mlt"].map(String::from).to_vec()];
    for p in policies {
        for (key, spec) in endpoints {
            let v = per_protein_mlts(groups, key, p);
            if v.is_empty() {
                continue;
            }
            median.push(vec![
                p.to_string(),
                spec.label(),
                fmt_target(spec.target),
                v.len().to_string(),
                opt(median_mlt(&v)),
            ]);
        }
    }

    let mut wins = vec![[
        "policy_a", "policy_b", "endpoint", "target", "a_better", "b_better", "proteins",
    ]
    .map(String::from)
    .to_vec()];
    for (ia, pa) in policies.iter().enumerate() {
        for pb in &policies[ia + 1..] {
            for (key, spec) in endpoints {
                let rows: Vec<&H2hRow> = h2h
                    .iter()
                    .filter(|h| EndpointKey::of(&h.endpoint) == *key && h.policy_a == *pa && h.policy_b == *pb)
                    .collect();
                if rows.is_empty() {
                    continue;
                }
                let count = |v: Verdict| rows.iter().filter(|h| h.result.verdict == v).count().to_string();
                wins.push(vec![
                    pa.to_string(),
                    pb.to_string(),
                    spec.label(),
                    fmt_target(spec.target),
                    count(Verdict::A),
                    count(Verdict::B),
                    rows.len().to_string(),
                ]);
            }
        }
    }

    let mut lift = vec![[
        "policy", "endpoint", "target", "significant_proteins", "median_lift_percent",
    ]
    .map(String::from)
    .to_vec()];
    if policies.first() == Some(&PolicyKind::Spade) {
        for p in &policies[1..] {
            for (key, spec) in endpoints {
                let v = significant_lifts(groups, h2h, key, p);
                lift.push(vec![
                    p.to_string(),
                    spec.label(),
                    fmt_target(spec.target),
                    v.len().to_string(),
                    opt(median_mlt(&v)),
                ]);
            }
        }
    }
    Ok((csv_string(median)?, csv_string(wins)?, csv_string(lift)?))
}

fn summary_text(
    groups: &Groups,
    endpoints: &BTreeMap<EndpointKey, EndpointSpec>,
    policies: &[PolicyKind],
    h2h: &[H2hRow],
    level: f64,
) -> String {
    let mut out = String::new();
    let cols: Vec<String> = endpoints
        .values()
        .map(|e| format!("{}@{}", e.label(), fmt_target(e.target)))
        .collect();
    let header = |out: &mut String, title: &str| {
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:<10}", "policy");
        for c in &cols {
            let _ = write!(out, "{c:>14}");
        }
        let _ = writeln!(out);
    };
    let mlts = |key: &EndpointKey, policy: &PolicyKind| per_protein_mlts(groups, key, policy);

    header(&mut out, "Median MLT across proteins (lower is better)");
    for p in policies {
        let _ = write!(out, "{:<10}", p.as_str());
        for key in endpoints.keys() {
            let v = mlts(key, p);
            match median_mlt(&v) {
                Ok(m) => {
                    let _ = write!(out, "{m:>14.1}");
                }
                Err(_) => {
                    let _ = write!(out, "{:>14}", "-");
                }
            }
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "Head-to-head: proteins where each side is significantly better (p < {level})");
    let mut pair_rows: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for (ia, pa) in policies.iter().enumerate() {
        for (ib, pb) in policies.iter().enumerate().skip(ia + 1) {
            let mut cells = Vec::new();
            for key in endpoints.keys() {
                let rows: Vec<&H2hRow> = h2h
                    .iter()
                    .filter(|h| EndpointKey::of(&h.endpoint) == *key && h.policy_a == *pa && h.policy_b == *pb)
                    .collect();
                let a = rows.iter().filter(|h| h.result.verdict == Verdict::A).count();
                let b = rows.iter().filter(|h| h.result.verdict == Verdict::B).count();
                cells.push(format!("{a}/{b}/{}", rows.len()));
            }
            pair_rows.insert((ia, ib), cells);
        }
    }
    let _ = write!(out, "{:<18}", "a vs b (a/b/n)");
    for c in &cols {
        let _ = write!(out, "{c:>14}");
    }
    let _ = writeln!(out);
    for ((ia, ib), cells) in &pair_rows {
        let _ = write!(out, "{:<18}", format!("{} vs {}", policies[*ia], policies[*ib]));
        for c in cells {
            let _ = write!(out, "{c:>14}");
        }
        let _ = writeln!(out);
    }

    if policies.first() == Some(&PolicyKind::Spade) && policies.len() > 1 {
        let _ = writeln!(out);
        header(
            &mut out,
            "Median percent lift of spade over each policy, over proteins with a significant verdict",
        );
        for p in &policies[1..] {
            let _ = write!(out, "{:<10}", p.as_str());
            for key in endpoints.keys() {
                let lifts = significant_lifts(groups, h2h, key, p);
                match median_mlt(&lifts) {
                    Ok(m) => {
                        let _ = write!(out, "{:>13.1}%", m);
                    }
                    Err(_) => {
                        let _ = write!(out, "{:>14}", "-");
                    }
                }
            }
            let _ = writeln!(out);
        }
    }

    let _ = writeln!(out);
    header(&mut out, "Failure rate (fraction of replicates capped)");
    for p in policies {
        let _ = write!(out, "{:<10}", p.as_str());
        for key in endpoints.keys() {
            let (fails, total) = groups
                .iter()
                .filter(|((k, _), _)| k == key)
                .filter_map(|(_, by)| by.get(p.as_str()))
                .fold((0, 0), |(f, t), r| (f + r.failures(), t + r.failed.len()));
            if total == 0 {
                let _ = write!(out, "{:>14}", "-");
            } else {
                let _ = write!(out, "{:>14.3}", fails as f64 / total as f64);
            }
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "Per-protein MLT histogram, bins of 40 tests over [0, 400]");
    for p in policies {
        for (key, spec) in endpoints {
            let v = mlts(key, p);
            if v.is_empty() {
                continue;
            }
            let bins = histogram(&v, 0.0, 400.0, 10);
            let cells: Vec<String> = bins.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(
                out,
                "{:<10}{:<14}{}",
                p.as_str(),
                format!("{}@{}", spec.label(), fmt_target(spec.target)),
                cells.join(" ")
            );
        }
    }
    out
}
