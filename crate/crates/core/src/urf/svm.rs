//! Linear soft-margin SVM trained in the dual by pairwise coordinate ascent
//! (SMO with second-order working-set selection).
//!
//! The intercept is unregularised, so the dual carries the equality
//! constraint `sum(y_i a_i) = 0` and every step moves two coordinates.
//! Only `w = sum(a_i y_i x_i)` is kept, which makes each step O(n d) and
//! avoids storing a Gram matrix.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FastError, Result};
use crate::latent::LatentVector;
use crate::numeric::{dot, KahanSum};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// Soft-margin cost `C`.
    pub penalty: f64,
    pub max_iterations: usize,
    /// Stopping tolerance on the maximal KKT violation.
    pub tolerance: f64,
    /// Fixes the traversal order used to break ties in working-set selection.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            penalty: 1.0,
            max_iterations: 100_000,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(FastError::Invalid(format!("svm penalty must be positive, got {}", self.penalty)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(FastError::Invalid(format!(
                "svm tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(FastError::Invalid("svm max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// A trained hyperplane `w . x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Final maximal KKT violation `m(a) - M(a)`.
    pub kkt_gap: f64,
    pub dual_objective: f64,
    pub primal_objective: f64,
    pub support_vectors: usize,
}

const TAU: f64 = 1e-12;
const RESYNC_EVERY: usize = 2048;

struct Problem {
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    d: usize,
    kdiag: Vec<f64>,
}

impl Problem {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

/// Trains on `positive_class` (label +1) against `negative_class` (label -1).
pub fn train_linear_svm(
    positive_class: &[LatentVector],
    negative_class: &[LatentVector],
    config: &SvmConfig,
) -> Result<LinearSvm> {
    config.validate()?;
    if positive_class.is_empty() || negative_class.is_empty() {
        return Err(FastError::Empty("svm training class"));
    }
    let d = positive_class[0].dim();
    let n = positive_class.len() + negative_class.len();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for (class, label) in [(positive_class, 1.0), (negative_class, -1.0)] {
        for z in class {
            z.check_dim(d)?;
            x.extend_from_slice(z.as_slice());
            y.push(label);
        }
    }
    let first = &x[..d];
    if x.chunks(d).all(|r| r == first) {
        return Err(FastError::Invalid("svm training points are all identical".into()));
    }
    let kdiag = x.chunks(d).map(|r| dot(r, r)).collect();
    let prob = Problem { x, y, n, d, kdiag };
    solve(&prob, config)
}

fn solve(p: &Problem, cfg: &SvmConfig) -> Result<LinearSvm> {
    let c = cfg.penalty;
    let mut order: Vec<usize> = (0..p.n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let mut alpha = vec![0.0; p.n];
    let mut w = vec![0.0; p.d];
    // gradient of 0.5 a'Qa - e'a, i.e. y_i (w . x_i) - 1
    let mut grad = vec![-1.0; p.n];

    let mut iterations = 0;
    let mut since_sync = 0;
    loop {
        let Some((i, j, gap)) = select_pair(p, &alpha, &grad, c, &order, cfg.tolerance) else {
            // Converged on the incrementally maintained state; confirm on a
            // fresh recomputation before accepting.
            if since_sync == 0 {
                break;
            }
            resync(p, &alpha, &mut w, &mut grad);
            since_sync = 0;
            continue;
        };
        if iterations >= cfg.max_iterations {
            return Err(FastError::NotConverged {
                iterations,
                gap,
                objective: dual_objective(&alpha, &w),
            });
        }
        iterations += 1;
        since_sync += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        update_pair(p, &mut alpha, &grad, i, j, c);
        let di = (alpha[i] - old_i) * p.y[i];
        let dj = (alpha[j] - old_j) * p.y[j];
        if di == 0.0 && dj == 0.0 {
            continue;
        }
        let (xi, xj) = (p.row(i), p.row(j));
        let dw: Vec<f64> = xi.iter().zip(xj).map(|(a, b)| di * a + dj * b).collect();
        for (wk, dk) in w.iter_mut().zip(&dw) {
            *wk += dk;
        }
        for t in 0..p.n {
            grad[t] += p.y[t] * dot(p.row(t), &dw);
        }
        if since_sync >= RESYNC_EVERY {
            resync(p, &alpha, &mut w, &mut grad);
            since_sync = 0;
        }
    }

    let (_, _, kkt_gap) = violation(p, &alpha, &grad, c);
    let bias = intercept(p, &alpha, &grad, c);
    let hinge: KahanSum = (0..p.n)
        .map(|t| (1.0 - p.y[t] * (dot(&w, p.row(t)) + bias)).max(0.0))
        .collect();
    let ww = dot(&w, &w);
    Ok(LinearSvm {
        primal_objective: 0.5 * ww + c * hinge.total(),
        dual_objective: dual_objective(&alpha, &w),
        support_vectors: alpha.iter().filter(|a| **a > 0.0).count(),
        weights: w,
        bias,
        iterations,
        kkt_gap,
    })
}

fn resync(p: &Problem, alpha: &[f64], w: &mut [f64], grad: &mut [f64]) {
    let mut acc = vec![KahanSum::new(); p.d];
    for t in 0..p.n {
        if alpha[t] != 0.0 {
            let s = alpha[t] * p.y[t];
            for (a, xv) in acc.iter_mut().zip(p.row(t)) {
                a.add(s * xv);
            }
        }
    }
    for (wk, a) in w.iter_mut().zip(&acc) {
        *wk = a.total();
    }
    for t in 0..p.n {
        grad[t] = p.y[t] * dot(w, p.row(t)) - 1.0;
    }
}

fn dual_objective(alpha: &[f64], w: &[f64]) -> f64 {
    let s: KahanSum = alpha.iter().copied().collect();
    s.total() - 0.5 * dot(w, w)
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Returns `(m, M, m - M)` over the up/low index sets.
fn violation(p: &Problem, alpha: &[f64], grad: &[f64], c: f64) -> (f64, f64, f64) {
    let mut gmax = f64::NEG_INFINITY;
    let mut gmin = f64::INFINITY;
    for t in 0..p.n {
        let v = -p.y[t] * grad[t];
        if in_up(p.y[t], alpha[t], c) {
            gmax = gmax.max(v);
        }
        if in_low(p.y[t], alpha[t], c) {
            gmin = gmin.min(v);
        }
    }
    (gmax, gmin, gmax - gmin)
}

/// Second-order working-set selection. `None` once the KKT gap is within tolerance.
fn select_pair(
    p: &Problem,
    alpha: &[f64],
    grad: &[f64],
    c: f64,
    order: &[usize],
    tol: f64,
) -> Option<(usize, usize, f64)> {
    let mut gmax = f64::NEG_INFINITY;
    let mut i = usize::MAX;
    for &t in order {
        if in_up(p.y[t], alpha[t], c) {
            let v = -p.y[t] * grad[t];
            if v > gmax {
                gmax = v;
                i = t;
            }
        }
    }
    let mut gmin = f64::INFINITY;
    let mut best = f64::INFINITY;
    let mut j = usize::MAX;
    if i != usize::MAX {
        let xi = p.row(i);
        for &t in order {
            if !in_low(p.y[t], alpha[t], c) {
                continue;
            }
            let v = -p.y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut a = p.kdiag[i] + p.kdiag[t] - 2.0 * dot(xi, p.row(t));
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
    }
    let gap = gmax - gmin;
    if gap <= tol || i == usize::MAX || j == usize::MAX {
        None
    } else {
        Some((i, j, gap))
    }
}

/// Analytic two-variable update with box clipping (LIBSVM's rule, `C_i = C_j = c`).
fn update_pair(p: &Problem, alpha: &mut [f64], grad: &[f64], i: usize, j: usize, c: f64) {
    let (yi, yj) = (p.y[i], p.y[j]);
    let kij = dot(p.row(i), p.row(j));
    let mut quad = p.kdiag[i] + p.kdiag[j] - 2.0 * kij;
    if quad <= 0.0 {
        quad = TAU;
    }
    let (mut ai, mut aj) = (alpha[i], alpha[j]);
    if yi != yj {
        let delta = (-grad[i] - grad[j]) / quad;
        let diff = ai - aj;
        ai += delta;
        aj += delta;
        if diff > 0.0 {
            if aj < 0.0 {
                aj = 0.0;
                ai = diff;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = -diff;
        }
        if diff > 0.0 {
            if ai > c {
                ai = c;
                aj = c - diff;
            }
        } else if aj > c {
            aj = c;
            ai = c + diff;
        }
    } else {
        let delta = (grad[i] - grad[j]) / quad;
        let sum = ai + aj;
        ai -= delta;
        aj += delta;
        if sum > c {
            if ai > c {
                ai = c;
                aj = sum - c;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if sum > c {
            if aj > c {
                aj = c;
                ai = sum - c;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
    }
    alpha[i] = ai;
    alpha[j] = aj;
}

/// Intercept from free support vectors, or the midpoint of the feasible
/// interval when none are free.
fn intercept(p: &Problem, alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut free = KahanSum::new();
    let mut n_free = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..p.n {
        let yg = p.y[t] * grad[t];
        if alpha[t] >= c {
            if p.y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if p.y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free.add(yg);
        }
    }
    let rho = if n_free > 0 {
        free.total() / n_free as f64
    } else {
        0.5 * (ub + lb)
    };
    -rho
}
