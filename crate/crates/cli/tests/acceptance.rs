//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p spade-cli --test acceptance`. Failing criteria are
//! reported but only fail the process when `SPADE_ACCEPTANCE_STRICT=1`.

use std::fs::OpenOptions;
use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spade_cli::args::SyntheticArgs;
use spade_cli::commands::run_suite;
use spade_cli::commands::throughput;
use spade_cli::datasets::synthetic_suite;
use spade_core::analytics::{binomial_upper_tail, emit_report, head_to_head, median_mlt, Verdict, DEFAULT_LEVEL};
use spade_core::baselines::{kernel_rows, tanimoto_kernel, GpModel, KernelKind};
use spade_core::data_io::format_hex_bits;
use spade_core::robust::{expected_hinge_loss, objective, objective_gradient, train, TrainingProblem};
use spade_core::{
    Dataset, EmbeddingMatrix, EndpointKind, EndpointSpec, LinearClassifier, PolicyConfig, PolicyKind, RunResult,
    SolverSettings,
};
use spade_service::api::{
    EmbeddingInput, LigandInput, ObservationInput, SubmitResultsRequest, SCHEMA_VERSION,
};
use spade_service::{CampaignStore, CreateCampaignRequest};

const MC_SAMPLES: usize = 1_000_000;
const MC_POINTS: usize = 100;
const MC_MAX_RATIO: f64 = 4.0;
const MC_SE_BOUND: f64 = 4.0;
/// Absolute floor for points where every sample is zero and the standard error vanishes.
const MC_FLOOR: f64 = 1e-15;
const MC_SECONDS: f64 = 60.0;
const GRAD_POINTS: usize = 50;
const GRAD_REL_TOL: f64 = 1e-5;
const CONVEX_PAIRS: usize = 100;
const CONVEX_SLACK: f64 = 1e-9;
const GRID: usize = 50;
const SOLVER_PROBLEMS: usize = 20;
const SOLVER_SLACK: f64 = 1e-3;
const GP_TOL: f64 = 1e-8;
const PSD_TOL: f64 = -1e-8;
const SIGN_TEST_MAX_N: u32 = 20;
const SUITE_PROTEINS: usize = 20;
const REPS: usize = 50;
const CAP: usize = 400;
const MLT_RATIO: f64 = 0.8;
const MIN_WINS: usize = 10;
const BENCH_BUDGET_SECONDS: f64 = 1800.0;
const THROUGHPUT_LIGANDS: usize = 1_000_000;
const THROUGHPUT_CLASSIFIERS: usize = 20;
const THROUGHPUT_SECONDS: f64 = 60.0;
const BATCH_PROTEINS: usize = 5;
const BATCH_REL_DIFF: f64 = 0.10;
const ABLATION_DEGRADATION: f64 = 0.10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn suite_args(proteins: usize) -> SyntheticArgs {
    SyntheticArgs {
        proteins,
        ligands: 5000,
        dim: 2048,
        density: 0.02,
        frac_above_8: 0.07,
        frac_above_8_5: 0.027,
        data_seed: 1000,
    }
}

fn closed_form() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..MC_POINTS {
        // |s/a| <= 4 keeps P(s + aZ > 0) >= 3e-5, so the sample SE is meaningful.
        let a: f64 = rng.random_range(0.05..5.0);
        let s: f64 = a * rng.random_range(-MC_MAX_RATIO..MC_MAX_RATIO);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..MC_SAMPLES {
            let z: f64 = rng.sample(StandardNormal);
            let v = (s + a * z).max(0.0);
            sum += v;
            sum_sq += v * v;
        }
        let n = MC_SAMPLES as f64;
        let mean = sum / n;
        let se = ((sum_sq / n - mean * mean).max(0.0) / n).sqrt();
        let err = (expected_hinge_loss(s, a).unwrap() - mean).abs();
        if err > MC_SE_BOUND * se + MC_FLOOR {
            failures += 1;
        }
        if se > 0.0 {
            worst = worst.max(err / se);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < MC_SECONDS,
        format!(
            "{MC_POINTS} points with |s/a| <= {MC_MAX_RATIO} x {MC_SAMPLES} samples, max |err|/SE {worst:.2} (bound {MC_SE_BOUND}), {failures} outside, {secs:.1} s (< {MC_SECONDS} s)"
        ),
    )
}

fn random_problem(rng: &mut ChaCha8Rng, dim: usize, n_neg: usize, sigma: f64) -> TrainingProblem {
    let anchor: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let negatives = (0..n_neg)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    TrainingProblem::new(anchor, negatives, sigma).unwrap()
}

fn random_classifier(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> LinearClassifier {
    LinearClassifier {
        offset: rng.random_range(-scale..scale),
        weights: (0..dim).map(|_| rng.random_range(-scale..scale)).collect(),
    }
}

fn gradient_and_convexity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < GRAD_POINTS {
        let sigma = rng.random_range(0.2..2.0);
        let p = random_problem(&mut rng, 4, 6, sigma);
        let clf = random_classifier(&mut rng, 4, 1.0);
        if p.negatives().iter().any(|x| (1.0 + clf.score(x)).abs() < 1e-3) {
            continue;
        }
        let (gc, gw) = objective_gradient(&p, &clf).unwrap();
        let fd = |k: Option<usize>| {
            let (mut plus, mut minus) = (clf.clone(), clf.clone());
            match k {
                None => {
                    plus.offset += h;
                    minus.offset -= h;
                }
                Some(k) => {
                    plus.weights[k] += h;
                    minus.weights[k] -= h;
                }
            }
            (objective(&p, &plus).unwrap() - objective(&p, &minus).unwrap()) / (2.0 * h)
        };
        let mut pairs = vec![(gc, fd(None))];
        pairs.extend((0..4).map(|k| (gw[k], fd(Some(k)))));
        for (g, f) in pairs {
            worst = worst.max((g - f).abs() / g.abs().max(1.0));
        }
        checked += 1;
    }

    let mut violations = 0;
    let p = random_problem(&mut rng, 3, 8, 1.0);
    for _ in 0..CONVEX_PAIRS {
        let a = random_classifier(&mut rng, 3, 3.0);
        let b = random_classifier(&mut rng, 3, 3.0);
        let mid = LinearClassifier {
            offset: 0.5 * (a.offset + b.offset),
            weights: a.weights.iter().zip(&b.weights).map(|(x, y)| 0.5 * (x + y)).collect(),
        };
        let lhs = objective(&p, &mid).unwrap();
        let rhs = 0.5 * (objective(&p, &a).unwrap() + objective(&p, &b).unwrap());
        if lhs > rhs + CONVEX_SLACK {
            violations += 1;
        }
    }
    outcome(
        worst <= GRAD_REL_TOL && violations == 0,
        format!(
            "max rel. error {worst:.2e} over {GRAD_POINTS} points (bound {GRAD_REL_TOL:e}); {violations}/{CONVEX_PAIRS} midpoint violations (slack {CONVEX_SLACK:e})"
        ),
    )
}

fn monotone_width() -> Outcome {
    let mut violations = 0;
    for i in 0..GRID {
        let s = -5.0 + 10.0 * i as f64 / (GRID - 1) as f64;
        let mut prev = f64::NEG_INFINITY;
        for j in 0..GRID {
            let a = 5.0 * j as f64 / (GRID - 1) as f64;
            let f = expected_hinge_loss(s, a).unwrap();
            if f < prev {
                violations += 1;
            }
            prev = f;
        }
    }
    outcome(
        violations == 0,
        format!("{GRID}x{GRID} grid over s in [-5, 5], a in [0, 5]: {violations} decreases (exact)"),
    )
}

fn grid_minimum(problem: &TrainingProblem) -> f64 {
    let mut best = f64::INFINITY;
    let mut clf = LinearClassifier::zeros(1);
    for i in 0..=1000 {
        clf.offset = -5.0 + 0.01 * i as f64;
        for j in 0..=1000 {
            clf.weights[0] = -5.0 + 0.01 * j as f64;
            best = best.min(objective(problem, &clf).unwrap());
        }
    }
    best
}

fn solver_quality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..SOLVER_PROBLEMS {
        let n_neg = rng.random_range(1..12);
        let sigma = rng.random_range(0.1..2.0);
        let p = random_problem(&mut rng, 1, n_neg, sigma);
        let (_, report) = train(&p, &SolverSettings::default());
        worst = worst.max(report.objective - grid_minimum(&p));
    }
    outcome(
        worst <= SOLVER_SLACK,
        format!("{SOLVER_PROBLEMS} problems, max (trained - grid minimum) {worst:.2e} (bound {SOLVER_SLACK:e})"),
    )
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize, d: usize, p: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| if rng.random::<f64>() < p { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn gp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let noise = 0.1;
    let mut worst = 0.0f64;
    for n in [1, 2, 5, 10, 15, 20] {
        let rows = random_bits(&mut rng, n + 10, 64, 0.3);
        let emb = EmbeddingMatrix::from_rows(&rows, 64);
        let train: Vec<usize> = (0..n).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(4.0..9.0)).collect();
        let test: Vec<usize> = (0..n + 10).collect();
        let gp = GpModel::fit(&emb, KernelKind::Tanimoto, &train, &y, noise).unwrap();
        let (mean, var) = gp.posterior(&test, true);

        let ybar = y.iter().sum::<f64>() / n as f64;
        let k = |i: usize, j: usize| tanimoto_kernel(&rows[i], &rows[j]);
        let gram: Vec<Vec<f64>> = (0..n)
            .map(|r| (0..n).map(|c| k(r, c) + if r == c { noise } else { 0.0 }).collect())
            .collect();
        let alpha = dense_solve(gram.clone(), y.iter().map(|v| v - ybar).collect());
        for (t, &j) in test.iter().enumerate() {
            let ks: Vec<f64> = (0..n).map(|i| k(i, j)).collect();
            let v = dense_solve(gram.clone(), ks.clone());
            let m = ybar + ks.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
            let s2 = k(j, j) + noise - ks.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            worst = worst.max((mean[t] - m).abs()).max((var[t] - s2).abs());
        }
    }
    let mut min_eig = f64::INFINITY;
    for trial in 0..10 {
        let rows = random_bits(&mut rng, 20, 96, 0.05 + 0.1 * trial as f64);
        let emb = EmbeddingMatrix::from_rows(&rows, 96);
        let gram = DMatrix::from_fn(20, 20, |i, j| kernel_rows(&emb, KernelKind::Tanimoto, i, j));
        let lo = gram.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        min_eig = min_eig.min(lo);
    }
    outcome(
        worst <= GP_TOL && min_eig >= PSD_TOL,
        format!(
            "max |posterior - dense solve| {worst:.2e} for n <= 20 (bound {GP_TOL:e}); min Gram eigenvalue {min_eig:.2e} (bound {PSD_TOL:e})"
        ),
    )
}

fn sign_test_exact() -> Outcome {
    let mut mismatches = 0;
    let mut cases = 0;
    for n in 0..=SIGN_TEST_MAX_N {
        let patterns = 1u64 << n;
        for k in 0..=n + 1 {
            let hits = (0..patterns).filter(|p| p.count_ones() >= k).count();
            let brute = hits as f64 / patterns as f64;
            if binomial_upper_tail(n as u64, k as u64) != brute {
                mismatches += 1;
            }
            cases += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{cases} (n, k) tails for n <= {SIGN_TEST_MAX_N} against all 2^n patterns: {mismatches} mismatches (exact)"),
    )
}

fn results_for(results: &[RunResult], policy: PolicyKind) -> Vec<&RunResult> {
    results.iter().filter(|r| r.policy == policy).collect()
}

fn median_of(results: &[&RunResult]) -> f64 {
    median_mlt(&results.iter().map(|r| r.mlt()).collect::<Vec<_>>()).unwrap()
}

struct Suite {
    data: Vec<Dataset>,
    spade: Vec<RunResult>,
    random: Vec<RunResult>,
}

fn desk_benchmark(suite: &Suite, seconds: f64) -> Outcome {
    let s: Vec<&RunResult> = suite.spade.iter().collect();
    let r: Vec<&RunResult> = suite.random.iter().collect();
    let (ms, mr) = (median_of(&s), median_of(&r));
    let wins = s
        .iter()
        .zip(&r)
        .filter(|(a, b)| {
            head_to_head(&a.ligands_to_target, &b.ligands_to_target, DEFAULT_LEVEL).unwrap().verdict == Verdict::A
        })
        .count();
    let ratio = ms / mr;
    outcome(
        ratio <= MLT_RATIO && wins >= MIN_WINS && seconds <= BENCH_BUDGET_SECONDS,
        format!(
            "median MLT SPADE {ms:.1} vs Random {mr:.1}, ratio {ratio:.3} (bound {MLT_RATIO}); SPADE better on {wins}/{} proteins at p < {DEFAULT_LEVEL} (need {MIN_WINS}); {seconds:.0} s on {} workers",
            s.len(),
            rayon::current_num_threads()
        ),
    )
}

fn endpoint_semantics(suite: &Suite) -> Outcome {
    let targets = [7.0, 7.5, 8.0, 8.5];
    let endpoints: Vec<EndpointSpec> = targets
        .iter()
        .map(|t| EndpointSpec::average_top10(*t))
        .chain(targets.iter().map(|t| EndpointSpec::min_top3(*t)))
        .collect();
    let config = PolicyConfig::default();
    let b = config.batch_size;
    let results = run_suite(
        &suite.data[..BATCH_PROTEINS],
        &[PolicyKind::Spade, PolicyKind::Random],
        &config,
        &endpoints,
        CAP,
        10,
        0,
    )
    .unwrap();
    let mut problems = Vec::new();
    for r in &results {
        for (ltt, failed) in r.ligands_to_target.iter().zip(&r.failed) {
            if ltt % b != 0 || *ltt < b || *ltt > CAP {
                problems.push(format!("ltt {ltt} off the grid"));
            }
            if *failed != (*ltt == CAP) {
                problems.push(format!("failure flag {failed} with ltt {ltt}"));
            }
        }
    }
    for group in results.chunks(endpoints.len()) {
        for kind in [EndpointKind::AverageTopK, EndpointKind::MinTopK] {
            let series: Vec<&RunResult> = group.iter().filter(|r| r.endpoint.kind == kind).collect();
            for w in series.windows(2) {
                if w[1].mlt() < w[0].mlt() {
                    problems.push(format!("{} {} MLT drops from t={} to t={}", w[0].protein_id, w[0].policy, w[0].endpoint.target, w[1].endpoint.target));
                }
            }
        }
    }
    let checked: usize = results.iter().map(|r| r.ligands_to_target.len()).sum();
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{checked} campaign outcomes on the {{b, 2b, ..., {CAP}}} grid, failure iff {CAP}, MLT non-decreasing over t in {targets:?}")
        } else {
            problems.join("; ")
        },
    )
}

fn throughput() -> Outcome {
    let r = throughput::measure(THROUGHPUT_LIGANDS, THROUGHPUT_CLASSIFIERS, 2048, 0.5, 0, 1).unwrap();
    let t = r.median_total();
    outcome(
        t <= THROUGHPUT_SECONDS,
        format!(
            "{THROUGHPUT_LIGANDS} ligands x {THROUGHPUT_CLASSIFIERS} classifiers, d=2048, one thread: {t:.2} s (statistics {:.2} s + scoring {:.2} s; bound {THROUGHPUT_SECONDS} s)",
            r.fit_seconds[0], r.score_seconds[0]
        ),
    )
}

fn batch_size(suite: &Suite) -> Outcome {
    let data = &suite.data[..BATCH_PROTEINS];
    let base: Vec<f64> = suite.spade[..BATCH_PROTEINS].iter().map(|r| r.mlt()).collect();
    let mut diffs = Vec::new();
    let mut per_b = Vec::new();
    for b in [5, 20] {
        let config = PolicyConfig {
            batch_size: b,
            ..PolicyConfig::default()
        };
        let res = run_suite(data, &[PolicyKind::Spade], &config, &[EndpointSpec::average_top10(8.0)], CAP, REPS, 0)
            .unwrap();
        let rel: Vec<f64> = res.iter().zip(&base).map(|(r, m)| (r.mlt() - m) / m).collect();
        per_b.push(format!(
            "b={b}: {}",
            rel.iter().map(|v| format!("{:+.1}%", 100.0 * v)).collect::<Vec<_>>().join(" ")
        ));
        diffs.extend(rel.iter().map(|v| v.abs()));
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    outcome(
        mean <= BATCH_REL_DIFF,
        format!(
            "mean |relative MLT difference| vs b=10 over {BATCH_PROTEINS} proteins {:.1}% (bound {:.0}%); {}",
            100.0 * mean,
            100.0 * BATCH_REL_DIFF,
            per_b.join("; ")
        ),
    )
}

fn campaign_request(ds: &Dataset, seed: u64) -> CreateCampaignRequest {
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
        policy: PolicyKind::Spade,
        config: PolicyConfig::default(),
        endpoints: vec![EndpointSpec::average_top10(8.0), EndpointSpec::min_top3(8.0)],
        seed,
    }
}

fn determinism(suite: &Suite) -> Outcome {
    let data = &suite.data[..3];
    let policies = [PolicyKind::Spade, PolicyKind::Random];
    let endpoints = [EndpointSpec::average_top10(8.0)];
    let config = PolicyConfig::default();
    let render = |workers: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        let results = pool.install(|| run_suite(data, &policies, &config, &endpoints, CAP, 5, 11)).unwrap();
        let r = emit_report(&results, DEFAULT_LEVEL).unwrap();
        (r.report_csv, r.h2h_csv, r.summary, serde_json::to_vec(&results).unwrap())
    };
    let reports_equal = render(1) == render(0) && render(0) == render(0);

    let ds = &suite.data[0];
    let dir = tempfile::tempdir().unwrap();
    let (id, before, path) = {
        let store = CampaignStore::open(dir.path()).unwrap();
        let id = store.create(campaign_request(ds, 3)).unwrap().campaign_id;
        for _ in 0..3 {
            let batch = store.suggest(&id, false).unwrap().batch;
            let results = SubmitResultsRequest {
                schema_version: SCHEMA_VERSION,
                results: batch
                    .iter()
                    .map(|l| ObservationInput {
                        ligand_id: l.clone(),
                        pic: ds.pic_of(l).unwrap(),
                    })
                    .collect(),
                off_batch: false,
            };
            store.submit(&id, &results).unwrap();
        }
        store.suggest(&id, false).unwrap();
        let before = serde_json::to_vec(&store.summary(&id).unwrap()).unwrap();
        (id.clone(), before, store.log_path(&id))
    };
    let mut f = OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"seq":8,"kind":"results_submitted","timestamp_ms":0,"payload":{"observ"#).unwrap();
    drop(f);
    let store = CampaignStore::open(dir.path()).unwrap();
    let after = serde_json::to_vec(&store.summary(&id).unwrap()).unwrap();
    let replay_equal = before == after;
    outcome(
        reports_equal && replay_equal,
        format!(
            "reports byte-identical across runs and worker counts: {reports_equal}; summary after torn-write recovery byte-identical ({} bytes): {replay_equal}",
            before.len()
        ),
    )
}

fn ablation(suite: &Suite) -> Outcome {
    let switches = [
        ("sigma=0", PolicyConfig { sigma: 0.0, ..PolicyConfig::default() }),
        ("alpha=1", PolicyConfig { alpha: 1.0, ..PolicyConfig::default() }),
        ("no help limit", PolicyConfig { help_limit: None, ..PolicyConfig::default() }),
    ];
    let hooks_ok = switches.iter().all(|(_, c)| c.validate().is_ok());
    let no_robust = run_suite(
        &suite.data,
        &[PolicyKind::Spade],
        &switches[0].1,
        &[EndpointSpec::average_top10(8.0)],
        CAP,
        REPS,
        0,
    )
    .unwrap();
    let base = median_of(&suite.spade.iter().collect::<Vec<_>>());
    let ablated = median_of(&no_robust.iter().collect::<Vec<_>>());
    let degradation = ablated / base - 1.0;
    outcome(
        hooks_ok && degradation >= ABLATION_DEGRADATION,
        format!(
            "switches {} accepted: {hooks_ok}; median MLT with sigma=0 {ablated:.1} vs {base:.1}, degradation {:+.1}% (need >= {:.0}%)",
            switches.iter().map(|s| s.0).collect::<Vec<_>>().join(", "),
            100.0 * degradation,
            100.0 * ABLATION_DEGRADATION
        ),
    )
}

fn report(name: &str, o: &Outcome, passed: &mut usize, total: &mut usize) {
    *total += 1;
    if o.pass {
        *passed += 1;
    }
    println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() {
    let (mut passed, mut total) = (0, 0);
    report("closed_form_vs_monte_carlo", &closed_form(), &mut passed, &mut total);
    report("gradient_and_convexity", &gradient_and_convexity(), &mut passed, &mut total);
    report("monotone_in_width", &monotone_width(), &mut passed, &mut total);
    report("solver_vs_grid_oracle", &solver_quality(), &mut passed, &mut total);
    report("gp_vs_dense_oracle", &gp_oracle(), &mut passed, &mut total);
    report("sign_test_exact", &sign_test_exact(), &mut passed, &mut total);

    let start = Instant::now();
    let data = synthetic_suite(&suite_args(SUITE_PROTEINS)).unwrap();
    let endpoint = [EndpointSpec::average_top10(8.0)];
    let config = PolicyConfig::default();
    let both = run_suite(&data, &[PolicyKind::Spade, PolicyKind::Random], &config, &endpoint, CAP, REPS, 0).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let suite = Suite {
        spade: results_for(&both, PolicyKind::Spade).into_iter().cloned().collect(),
        random: results_for(&both, PolicyKind::Random).into_iter().cloned().collect(),
        data,
    };
    report("desk_benchmark", &desk_benchmark(&suite, seconds), &mut passed, &mut total);
    report("endpoint_semantics", &endpoint_semantics(&suite), &mut passed, &mut total);
    report("throughput", &throughput(), &mut passed, &mut total);
    report("batch_size_robustness", &batch_size(&suite), &mut passed, &mut total);
    report("determinism_and_replay", &determinism(&suite), &mut passed, &mut total);
    report("robustness_ablation", &ablation(&suite), &mut passed, &mut total);

    println!("acceptance: {passed}/{total} criteria passed");
    let strict = std::env::var("SPADE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < total {
        std::process::exit(1);
    }
}
