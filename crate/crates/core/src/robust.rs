//! Robust one-vs-rest linear classifier.
//!
//! The positive side of the loss is the hinge averaged over a Gaussian ball of
//! width `sigma` around the anchor. For `C(x) = c + w·x` and
//! `s = 1 - (c + w·x_i)` the expectation has the closed form
//! `s·Φ(s/a) + a·φ(s/a)` with `a = sigma·|w|`, so nothing is sampled.
//!
//! Training works in the span of the training vectors: every gradient of the
//! objective with respect to `w` is a combination of the anchor, the negatives
//! and `w` itself, so starting from `w = 0` the iterates stay in that span and
//! `w = Σ β_k x_k`. Only the Gram matrix of the training vectors is needed,
//! which makes the per-iteration cost independent of the embedding dimension.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::dot;
use crate::gaussian;
use crate::types::{LinearClassifier, SolverSettings};

#[derive(Debug, Error, PartialEq)]
pub enum RobustError {
    #[error("non-finite input to expected hinge loss (s = {s}, a = {a})")]
    NonFinite { s: f64, a: f64 },
    #[error("width must be non-negative, got {0}")]
    NegativeWidth(f64),
    #[error("gradient needs a strictly positive width, got {0}")]
    NonPositiveWidth(f64),
    #[error("negative set is empty")]
    EmptyNegatives,
    #[error("sigma must be finite and non-negative, got {0}")]
    Sigma(f64),
    #[error("vector {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
}

/// `E[max(0, s + a·Z)]` for `Z ~ N(0, 1)`.
///
/// Equals `s·Φ(s/a) + a·φ(s/a)` for `a > 0` and `max(0, s)` at `a = 0`.
pub fn expected_hinge_loss(s: f64, a: f64) -> Result<f64, RobustError> {
    if !s.is_finite() || !a.is_finite() {
        return Err(RobustError::NonFinite { s, a });
    }
    if a < 0.0 {
        return Err(RobustError::NegativeWidth(a));
    }
    Ok(ehl(s, a))
}

/// Partial derivatives `(∂/∂s, ∂/∂a) = (Φ(s/a), φ(s/a))` of the expected hinge loss.
pub fn expected_hinge_loss_grad(s: f64, a: f64) -> Result<(f64, f64), RobustError> {
    if !s.is_finite() || !a.is_finite() {
        return Err(RobustError::NonFinite { s, a });
    }
    if a <= 0.0 {
        return Err(RobustError::NonPositiveWidth(a));
    }
    let z = s / a;
    Ok((gaussian::cdf(z), gaussian::pdf(z)))
}

/// Unchecked closed form.
///
/// Written as `max(s, 0) + a·g(|s|/a)` with `g(z) = φ(z) - z·Φ(-z)`, which is
/// algebraically the same as `s·Φ(s/a) + a·φ(s/a)` but keeps the small
/// correction term away from the large `s` term.
#[inline]
pub(crate) fn ehl(s: f64, a: f64) -> f64 {
    if a <= 0.0 {
        return s.max(0.0);
    }
    let z = s.abs() / a;
    let tail = if z.is_finite() {
        (a * (gaussian::pdf(z) - z * gaussian::cdf(-z))).max(0.0)
    } else {
        0.0
    };
    s.max(0.0) + tail
}

#[inline]
fn hinge(u: f64) -> f64 {
    u.max(0.0)
}

/// Quadratically smoothed hinge: within `mu / 2` of the hinge everywhere.
#[inline]
fn huber_hinge(u: f64, mu: f64) -> (f64, f64) {
    if u <= 0.0 {
        (0.0, 0.0)
    } else if u < mu {
        (u * u / (2.0 * mu), u / mu)
    } else {
        (u - 0.5 * mu, 1.0)
    }
}

/// One anchor against a set of negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingProblem {
    anchor: Vec<f64>,
    negatives: Vec<Vec<f64>>,
    sigma: f64,
}

impl TrainingProblem {
    pub fn new(anchor: Vec<f64>, negatives: Vec<Vec<f64>>, sigma: f64) -> Result<Self, RobustError> {
        if negatives.is_empty() {
            return Err(RobustError::EmptyNegatives);
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(RobustError::Sigma(sigma));
        }
        let d = anchor.len();
        if let Some((i, v)) = negatives.iter().enumerate().find(|(_, v)| v.len() != d) {
            return Err(RobustError::Dimension {
                index: i + 1,
                expected: d,
                found: v.len(),
            });
        }
        Ok(TrainingProblem {
            anchor,
            negatives,
            sigma,
        })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn negatives(&self) -> &[Vec<f64>] {
        &self.negatives
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    fn check_classifier(&self, clf: &LinearClassifier) -> Result<(), RobustError> {
        if clf.weights.len() != self.dim() {
            return Err(RobustError::Dimension {
                index: 0,
                expected: self.dim(),
                found: clf.weights.len(),
            });
        }
        Ok(())
    }

    /// Gram matrix of `[anchor, negatives...]`.
    fn gram(&self) -> Vec<f64> {
        let rows: Vec<&[f64]> = std::iter::once(self.anchor.as_slice())
            .chain(self.negatives.iter().map(Vec::as_slice))
            .collect();
        let n = rows.len();
        let mut g = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = dot(rows[a], rows[b]);
                g[a * n + b] = v;
                g[b * n + a] = v;
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Mean negative hinge plus the closed-form robust positive term.
pub fn objective(problem: &TrainingProblem, clf: &LinearClassifier) -> Result<f64, RobustError> {
    problem.check_classifier(clf)?;
    let neg: f64 = problem
        .negatives
        .iter()
        .map(|x| hinge(1.0 + clf.score(x)))
        .sum::<f64>()
        / problem.negatives.len() as f64;
    let s = 1.0 - clf.score(&problem.anchor);
    Ok(neg + ehl(s, problem.sigma * clf.weight_norm()))
}

/// (Sub)gradient of [`objective`] with respect to `(c, w)`.
///
/// At a hinge kink the zero one-sided derivative is used.
pub fn objective_gradient(
    problem: &TrainingProblem,
    clf: &LinearClassifier,
) -> Result<(f64, Vec<f64>), RobustError> {
    problem.check_classifier(clf)?;
    let n = problem.negatives.len() as f64;
    let mut gc = 0.0;
    let mut gw = vec![0.0; problem.dim()];
    for x in &problem.negatives {
        if 1.0 + clf.score(x) > 0.0 {
            gc += 1.0 / n;
            for (g, v) in gw.iter_mut().zip(x) {
                *g += v / n;
            }
        }
    }
    let s = 1.0 - clf.score(&problem.anchor);
    let norm = clf.weight_norm();
    let a = problem.sigma * norm;
    if a > 0.0 {
        let (ds, da) = expected_hinge_loss_grad(s, a)?;
        gc -= ds;
        for ((g, x), w) in gw.iter_mut().zip(&problem.anchor).zip(&clf.weights) {
            *g += -ds * x + da * problem.sigma * w / norm;
        }
    } else if s > 0.0 {
        gc -= 1.0;
        for (g, x) in gw.iter_mut().zip(&problem.anchor) {
            *g -= x;
        }
    }
    Ok((gc, gw))
}

/// Minimizes the robust objective from `(c, w) = (0, 0)`.
///
/// Deterministic: equal inputs give bit-identical classifiers.
pub fn train(problem: &TrainingProblem, settings: &SolverSettings) -> (LinearClassifier, SolverReport) {
    let gram = problem.gram();
    let sol = solve_gram(&gram, problem.negatives.len() + 1, problem.sigma, settings);
    let mut weights = vec![0.0; problem.dim()];
    let rows = std::iter::once(&problem.anchor).chain(problem.negatives.iter());
    for (b, x) in sol.coef.iter().zip(rows) {
        if *b != 0.0 {
            for (w, v) in weights.iter_mut().zip(x) {
                *w += b * v;
            }
        }
    }
    (
        LinearClassifier {
            offset: sol.offset,
            weights,
        },
        sol.report,
    )
}

/// Solution in span coordinates: `w = Σ_k coef[k]·x_k`, index 0 is the anchor.
#[derive(Debug, Clone)]
pub(crate) struct GramSolution {
    pub offset: f64,
    pub coef: Vec<f64>,
    pub report: SolverReport,
}

/// Smoothing levels for the continuation; the last stage is within `1e-6` of
/// the exact objective.
const SMOOTHING: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// A vector in `(c, w)` space in span coordinates, carrying `G·coef` so that
/// inner products in the `w` metric cost `O(n)`.
#[derive(Debug, Clone)]
struct SpanVec {
    c: f64,
    coef: Vec<f64>,
    g_coef: Vec<f64>,
}

impl SpanVec {
    fn inner(&self, other: &SpanVec) -> f64 {
        self.c * other.c + dot(&self.coef, &other.g_coef)
    }

    fn axpy(&mut self, a: f64, x: &SpanVec) {
        self.c += a * x.c;
        for (v, o) in self.coef.iter_mut().zip(&x.coef) {
            *v += a * o;
        }
        for (v, o) in self.g_coef.iter_mut().zip(&x.g_coef) {
            *v += a * o;
        }
    }

    fn scale(&mut self, a: f64) {
        self.c *= a;
        self.coef.iter_mut().for_each(|v| *v *= a);
        self.g_coef.iter_mut().for_each(|v| *v *= a);
    }

    fn sub(&self, other: &SpanVec) -> SpanVec {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

struct GramObjective<'a> {
    gram: &'a [f64],
    n: usize,
    sigma: f64,
}

/// Iterate state: offset, span coefficients and `u = G·coef` (the values `w·x_k`).
#[derive(Debug, Clone)]
struct Iterate {
    c: f64,
    coef: Vec<f64>,
    u: Vec<f64>,
}

impl<'a> GramObjective<'a> {
    fn matvec(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                let row = &self.gram[j * self.n..(j + 1) * self.n];
                for (o, g) in out.iter_mut().zip(row) {
                    *o += vj * g;
                }
            }
        }
    }

    fn sq_norm(&self, coef: &[f64], u: &[f64]) -> f64 {
        dot(coef, u).max(0.0)
    }

    /// Objective from the raw ingredients: `u` values, offset and `|w|²`.
    fn value_parts(&self, c: f64, u: &[f64], q: f64, mu: f64) -> f64 {
        let n_neg = (self.n - 1) as f64;
        let neg: f64 = if mu > 0.0 {
            u[1..].iter().map(|&v| huber_hinge(1.0 + c + v, mu).0).sum()
        } else {
            u[1..].iter().map(|&v| hinge(1.0 + c + v)).sum()
        };
        let s = 1.0 - c - u[0];
        let a = if mu > 0.0 {
            (self.sigma * self.sigma * q + mu * mu).sqrt()
        } else {
            self.sigma * q.sqrt()
        };
        neg / n_neg + ehl(s, a)
    }

    fn value(&self, it: &Iterate, mu: f64) -> f64 {
        self.value_parts(it.c, &it.u, self.sq_norm(&it.coef, &it.u), mu)
    }

    /// Gradient of the smoothed objective (`mu > 0`).
    fn gradient(&self, it: &Iterate, mu: f64) -> SpanVec {
        let n_neg = (self.n - 1) as f64;
        let mut e = vec![0.0; self.n];
        let mut gc = 0.0;
        for j in 1..self.n {
            let r = huber_hinge(1.0 + it.c + it.u[j], mu).1 / n_neg;
            e[j] = r;
            gc += r;
        }
        let q = self.sq_norm(&it.coef, &it.u);
        let s = 1.0 - it.c - it.u[0];
        let a = (self.sigma * self.sigma * q + mu * mu).sqrt();
        let z = s / a;
        let ds = gaussian::cdf(z);
        let kappa = gaussian::pdf(z) * self.sigma * self.sigma / a;
        e[0] = -ds;
        gc -= ds;
        let mut g_coef = vec![0.0; self.n];
        self.matvec(&e, &mut g_coef);
        let mut coef = e;
        if kappa != 0.0 {
            for (k, v) in coef.iter_mut().enumerate() {
                *v += kappa * it.coef[k];
            }
            for (k, v) in g_coef.iter_mut().enumerate() {
                *v += kappa * it.u[k];
            }
        }
        SpanVec { c: gc, coef, g_coef }
    }
}

/// L-BFGS on a smoothed copy of the objective with continuation in the
/// smoothing width, starting from the origin. The returned objective is the
/// exact (unsmoothed) value.
pub(crate) fn solve_gram(gram: &[f64], n: usize, sigma: f64, settings: &SolverSettings) -> GramSolution {
    debug_assert_eq!(gram.len(), n * n);
    debug_assert!(n >= 2);
    let obj = GramObjective { gram, n, sigma };
    let mut it = Iterate {
        c: 0.0,
        coef: vec![0.0; n],
        u: vec![0.0; n],
    };
    let mut best = (obj.value(&it, 0.0), it.clone());
    let mut iterations = 0usize;
    let mut converged = true;
    let window = settings.window.max(1);

    'stages: for &mu in &SMOOTHING {
        obj.matvec(&it.coef, &mut it.u);
        let mut f = obj.value(&it, mu);
        let mut g = obj.gradient(&it, mu);
        let mut memory: Vec<(SpanVec, SpanVec, f64)> = Vec::with_capacity(LBFGS_MEMORY);
        let mut history = vec![f];

        loop {
            if iterations >= settings.max_iterations {
                converged = false;
                break 'stages;
            }
            let g_norm_sq = g.inner(&g);
            if g_norm_sq <= 1e-24 {
                break;
            }

            let mut step = None;
            for attempt in 0..2 {
                let p = if attempt == 0 && !memory.is_empty() {
                    lbfgs_direction(&g, &memory)
                } else {
                    let mut p = g.clone();
                    p.scale(-1.0);
                    p
                };
                let slope = g.inner(&p);
                if slope >= 0.0 {
                    memory.clear();
                    continue;
                }
                let pu = dot(&p.coef, &it.u);
                let pgp = dot(&p.coef, &p.g_coef);
                let q0 = obj.sq_norm(&it.coef, &it.u);
                let mut t = 1.0;
                let mut trial_u = vec![0.0; n];
                for _ in 0..MAX_HALVINGS {
                    for k in 0..n {
                        trial_u[k] = it.u[k] + t * p.g_coef[k];
                    }
                    let q = (q0 + 2.0 * t * pu + t * t * pgp).max(0.0);
                    let ft = obj.value_parts(it.c + t * p.c, &trial_u, q, mu);
                    if ft <= f + ARMIJO_C1 * t * slope {
                        step = Some((t, p, trial_u, ft));
                        break;
                    }
                    t *= 0.5;
                }
                if step.is_some() {
                    break;
                }
                memory.clear();
            }
            let Some((t, p, new_u, f_new)) = step else {
                break;
            };

            it.c += t * p.c;
            for (b, d) in it.coef.iter_mut().zip(&p.coef) {
                *b += t * d;
            }
            it.u = new_u;
            iterations += 1;

            let g_new = obj.gradient(&it, mu);
            let mut s_vec = p;
            s_vec.scale(t);
            let y_vec = g_new.sub(&g);
            let sy = s_vec.inner(&y_vec);
            if sy > 1e-12 * s_vec.inner(&s_vec).sqrt() * y_vec.inner(&y_vec).sqrt() && sy > 0.0 {
                if memory.len() == LBFGS_MEMORY {
                    memory.remove(0);
                }
                memory.push((s_vec, y_vec, 1.0 / sy));
            }
            g = g_new;
            f = f_new;
            history.push(f);
            let len = history.len();
            if len > window && history[len - 1 - window] - f < settings.tolerance {
                break;
            }
        }

        obj.matvec(&it.coef, &mut it.u);
        let exact = obj.value(&it, 0.0);
        if exact <= best.0 {
            best = (exact, it.clone());
        }
    }

    let (objective, it) = best;
    GramSolution {
        offset: it.c,
        coef: it.coef,
        report: SolverReport {
            objective,
            iterations,
            converged,
        },
    }
}

/// Two-loop recursion; all inner products in the `w` metric.
fn lbfgs_direction(g: &SpanVec, memory: &[(SpanVec, SpanVec, f64)]) -> SpanVec {
    let mut q = g.clone();
    let mut alphas = vec![0.0; memory.len()];
    for (i, (s, y, rho)) in memory.iter().enumerate().rev() {
        let a = rho * s.inner(&q);
        alphas[i] = a;
        q.axpy(-a, y);
    }
    let (s, y, _) = memory.last().expect("non-empty memory");
    let gamma = s.inner(y) / y.inner(y);
    q.scale(gamma);
    for (i, (s, y, rho)) in memory.iter().enumerate() {
        let b = rho * y.inner(&q);
        q.axpy(alphas[i] - b, s);
    }
    q.scale(-1.0);
    q
}
