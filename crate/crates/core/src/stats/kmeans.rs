//! Seeded k-means (k-means++ initialisation, Lloyd iterations) and the elbow
//! curve.
//!
//! Iteration stops when assignments no longer change, when the largest
//! centroid shift falls below `tol`, or after `max_iter` updates. On the first
//! exit every point sits with its nearest centroid and each centroid is the
//! exact mean of its points.
//!
//! A cluster that loses all its points is re-seeded at the point farthest
//! from its current centroid (lowest index on ties).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::StatsError;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub seed: u64,
    pub iterations_run: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid, lowest index on ties.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Weighted sum of squared distances from each point to its assigned centroid.
pub fn inertia(points: &[Vec<f64>], weights: &[f64], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points.iter().zip(weights).zip(assignments).map(|((p, w), &a)| w * sq_dist(p, &centroids[a])).sum()
}

fn validate(points: &[Vec<f64>], weights: &[f64], k: usize) -> Result<usize, StatsError> {
    if k == 0 {
        return Err(StatsError::Argument("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(StatsError::Argument(format!("k = {k} exceeds the {} points", points.len())));
    }
    if weights.len() != points.len() {
        return Err(StatsError::Argument("one weight per point required".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(StatsError::Argument("weights must be positive".into()));
    }
    let dim = points[0].len();
    for p in points {
        if p.len() != dim {
            return Err(StatsError::Argument("points differ in dimension".into()));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::Argument("non-finite coordinate".into()));
        }
    }
    Ok(dim)
}

/// First index whose cumulative mass exceeds `target`.
fn pick(masses: &[f64], target: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, m) in masses.iter().enumerate() {
        if *m > 0.0 {
            last_positive = i;
        }
        cum += m;
        if target < cum {
            return i;
        }
    }
    last_positive
}

fn plus_plus_next(points: &[Vec<f64>], weights: &[f64], centroids: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let masses: Vec<f64> = points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * centroids.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
        .collect();
    let total: f64 = masses.iter().sum();
    let u: f64 = rng.random();
    if total > 0.0 {
        points[pick(&masses, u * total)].clone()
    } else {
        // every point coincides with a centre already
        points[pick(weights, u * weights.iter().sum::<f64>())].clone()
    }
}

fn plus_plus(points: &[Vec<f64>], weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let u: f64 = rng.random();
    let mut centroids = vec![points[pick(weights, u * weights.iter().sum::<f64>())].clone()];
    while centroids.len() < k {
        let next = plus_plus_next(points, weights, &centroids, rng);
        centroids.push(next);
    }
    centroids
}

fn lloyd(
    points: &[Vec<f64>],
    weights: &[f64],
    mut centroids: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> (Vec<Vec<f64>>, Vec<usize>, usize, bool) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut mass = vec![0.0; k];
        for ((p, w), &a) in points.iter().zip(weights).zip(&assignments) {
            mass[a] += w;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += w * x;
            }
        }
        let mut updated: Vec<Vec<f64>> = sums
            .iter()
            .zip(&mass)
            .zip(&centroids)
            .map(|((s, m), old)| if *m > 0.0 { s.iter().map(|x| x / m).collect() } else { old.clone() })
            .collect();
        let mut taken = Vec::new();
        for j in (0..k).filter(|j| mass[*j] == 0.0) {
            let far = points
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken.contains(i))
                .map(|(i, p)| (i, sq_dist(p, &centroids[assignments[i]])))
                .fold((usize::MAX, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
            if far.0 != usize::MAX {
                taken.push(far.0);
                updated[j] = points[far.0].clone();
            }
        }
        let shift = centroids.iter().zip(&updated).map(|(a, b)| sq_dist(a, b).sqrt()).fold(0.0, f64::max);
        centroids = updated;
        iterations += 1;
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignments && taken.is_empty() {
            converged = true;
            break;
        }
        assignments = next;
        if shift < tol && taken.is_empty() {
            break;
        }
    }
    (centroids, assignments, iterations, converged)
}

fn finish(
    points: &[Vec<f64>],
    weights: &[f64],
    seed: u64,
    (centroids, assignments, iterations_run, converged): (Vec<Vec<f64>>, Vec<usize>, usize, bool),
) -> ClusterModel {
    let inertia = inertia(points, weights, &centroids, &assignments);
    ClusterModel { k: centroids.len(), centroids, assignments, inertia, seed, iterations_run, converged }
}

pub fn kmeans_fit(points: &[Vec<f64>], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<ClusterModel, StatsError> {
    kmeans_fit_weighted(points, &vec![1.0; points.len()], k, seed, max_iter, tol)
}

/// k-means where point `i` counts `weights[i]` times.
pub fn kmeans_fit_weighted(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel, StatsError> {
    validate(points, weights, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = plus_plus(points, weights, k, &mut rng);
    Ok(finish(points, weights, seed, lloyd(points, weights, init, max_iter, tol)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElbowCurve {
    /// `(k, inertia)` in increasing `k`.
    pub inertias: Vec<(usize, f64)>,
    pub suggested_k: usize,
    #[serde(skip)]
    pub models: Vec<ClusterModel>,
}

/// Fits every `k` in `k_min..=k_max`. Each `k > k_min` is fitted twice, from a
/// fresh k-means++ start and from the `k - 1` centroids plus one k-means++
/// centre, keeping the lower inertia; the warm start cannot do worse than
/// `k - 1`, so the curve never rises.
///
/// The suggested `k` maximises the second difference
/// `I(k-1) - 2 I(k) + I(k+1)` over interior points (smallest `k` on ties);
/// with fewer than three fitted values it is `k_min`.
pub fn elbow(
    points: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ElbowCurve, StatsError> {
    if k_min == 0 || k_min > k_max {
        return Err(StatsError::Argument(format!("invalid k range {k_min}..={k_max}")));
    }
    let weights = vec![1.0; points.len()];
    validate(points, &weights, k_max)?;
    let mut models: Vec<ClusterModel> = Vec::new();
    for k in k_min..=k_max {
        let fresh = kmeans_fit_weighted(points, &weights, k, seed, max_iter, tol)?;
        let model = match models.last() {
            Some(prev) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut init = prev.centroids.clone();
                init.push(plus_plus_next(points, &weights, &init, &mut rng));
                let warm = finish(points, &weights, seed, lloyd(points, &weights, init, max_iter, tol));
                if warm.inertia < fresh.inertia {
                    warm
                } else {
                    fresh
                }
            }
            None => fresh,
        };
        models.push(model);
    }
    let inertias: Vec<(usize, f64)> = models.iter().map(|m| (m.k, m.inertia)).collect();
    let mut suggested_k = k_min;
    let mut best = f64::NEG_INFINITY;
    for w in inertias.windows(3) {
        let d2 = w[0].1 - 2.0 * w[1].1 + w[2].1;
        if d2 > best {
            best = d2;
            suggested_k = w[1].0;
        }
    }
    Ok(ElbowCurve { inertias, suggested_k, models })
}
