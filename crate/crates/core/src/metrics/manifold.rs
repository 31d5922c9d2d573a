//! kNN-ball density and coverage.
//!
//! Every reference point `r` owns a ball whose radius is the distance to its
//! k-th nearest reference neighbour. Density counts, per generated point, how
//! many balls it lands in (normalised by `k`); coverage is the fraction of
//! balls that contain at least one generated point.

use std::collections::BinaryHeap;

use ordered::Ord64;

use crate::error::{FastError, Result};
use crate::numeric::euclidean;

pub const DEFAULT_K: usize = 5;
/// Above this many points in total the pruned search is used.
pub const PRUNING_THRESHOLD: usize = 10_000;

const PRUNE_SLACK: f64 = 1e-9;

mod ordered {
    /// Total-ordered f64 for the kNN heap.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Ord64(pub f64);

    impl Eq for Ord64 {}

    impl PartialOrd for Ord64 {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    impl Ord for Ord64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}

fn validate<R: AsRef<[f64]>>(real: &[R], gen: &[R], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(FastError::Invalid("k must be positive".into()));
    }
    if real.len() <= k {
        return Err(FastError::Invalid(format!(
            "k = {k} needs more than {k} reference points, got {}",
            real.len()
        )));
    }
    if gen.is_empty() {
        return Err(FastError::Empty("generated set"));
    }
    let d = real[0].as_ref().len();
    for r in real.iter().chain(gen) {
        if r.as_ref().len() != d {
            return Err(FastError::DimensionMismatch {
                expected: d,
                found: r.as_ref().len(),
            });
        }
    }
    Ok(d)
}

/// Returns `(density, coverage)`, choosing the exact brute-force or the
/// exact pruned search by problem size.
pub fn density_coverage<R: AsRef<[f64]>>(real: &[R], gen: &[R], k: usize) -> Result<(f64, f64)> {
    if real.len() + gen.len() <= PRUNING_THRESHOLD {
        density_coverage_brute(real, gen, k)
    } else {
        density_coverage_pruned(real, gen, k)
    }
}

pub fn density_coverage_brute<R: AsRef<[f64]>>(real: &[R], gen: &[R], k: usize) -> Result<(f64, f64)> {
    validate(real, gen, k)?;
    let radii: Vec<f64> = (0..real.len())
        .map(|i| {
            let mut dists: Vec<f64> = (0..real.len())
                .filter(|&j| j != i)
                .map(|j| euclidean(real[i].as_ref(), real[j].as_ref()))
                .collect();
            let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect();
    let mut covered = vec![false; real.len()];
    let mut hits = 0u64;
    for g in gen {
        for (j, r) in real.iter().enumerate() {
            if euclidean(g.as_ref(), r.as_ref()) <= radii[j] {
                hits += 1;
                covered[j] = true;
            }
        }
    }
    Ok(finish(hits, &covered, k, gen.len()))
}

fn finish(hits: u64, covered: &[bool], k: usize, n_gen: usize) -> (f64, f64) {
    let density = hits as f64 / (k as f64 * n_gen as f64);
    let coverage = covered.iter().filter(|c| **c).count() as f64 / covered.len() as f64;
    (density, coverage)
}

/// Same result as the brute-force search, using the first coordinate as a
/// sort key: `|a_0 - b_0| <= ||a - b||` bounds which pairs need a full distance.
pub fn density_coverage_pruned<R: AsRef<[f64]>>(real: &[R], gen: &[R], k: usize) -> Result<(f64, f64)> {
    validate(real, gen, k)?;
    let key = |v: &[f64]| v.first().copied().unwrap_or(0.0);
    let mut order: Vec<usize> = (0..real.len()).collect();
    order.sort_by(|&a, &b| key(real[a].as_ref()).total_cmp(&key(real[b].as_ref())));
    let keys: Vec<f64> = order.iter().map(|&i| key(real[i].as_ref())).collect();

    let mut radii = vec![0.0; real.len()];
    for (pos, &i) in order.iter().enumerate() {
        let ri = real[i].as_ref();
        let mut heap: BinaryHeap<Ord64> = BinaryHeap::with_capacity(k + 1);
        let (mut lo, mut hi) = (pos, pos + 1);
        loop {
            let bound = if heap.len() == k {
                heap.peek().map(|d| d.0).unwrap_or(f64::INFINITY)
            } else {
                f64::INFINITY
            };
            let reach = bound * (1.0 + PRUNE_SLACK) + PRUNE_SLACK;
            let left = (lo > 0 && keys[pos] - keys[lo - 1] <= reach).then(|| lo - 1);
            let right = (hi < order.len() && keys[hi] - keys[pos] <= reach).then_some(hi);
            let next = match (left, right) {
                (None, None) => break,
                (Some(l), None) => {
                    lo = l;
                    l
                }
                (None, Some(r)) => {
                    hi = r + 1;
                    r
                }
                (Some(l), Some(r)) => {
                    if keys[pos] - keys[l] <= keys[r] - keys[pos] {
                        lo = l;
                        l
                    } else {
                        hi = r + 1;
                        r
                    }
                }
            };
            let d = euclidean(ri, real[order[next]].as_ref());
            if heap.len() < k {
                heap.push(Ord64(d));
            } else if d < heap.peek().map(|x| x.0).unwrap_or(f64::INFINITY) {
                heap.pop();
                heap.push(Ord64(d));
            }
        }
        radii[i] = heap.peek().map(|d| d.0).unwrap_or(0.0);
    }

    let max_radius = radii.iter().copied().fold(0.0f64, f64::max);
    let reach = max_radius * (1.0 + PRUNE_SLACK) + PRUNE_SLACK;
    let mut covered = vec![false; real.len()];
    let mut hits = 0u64;
    for g in gen {
        let gk = key(g.as_ref());
        let start = keys.partition_point(|&x| x < gk - reach);
        let end = keys.partition_point(|&x| x <= gk + reach);
        for &j in &order[start..end] {
            if euclidean(g.as_ref(), real[j].as_ref()) <= radii[j] {
                hits += 1;
                covered[j] = true;
            }
        }
    }
    Ok(finish(hits, &covered, k, gen.len()))
}
