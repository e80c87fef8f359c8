//! Seeded k-means: k-means++ initialization, Lloyd iterations until every
//! centroid moves less than `1e-6` (or 300 iterations), and empty-cluster
//! repair that moves the point farthest from its own centroid into the
//! empty cluster.

use serde::{Deserialize, Serialize};

use super::QepError;
use crate::embedding::EmbeddingVector;
use crate::rng::SplitMix64;

pub const MAX_ITERATIONS: usize = 300;
pub const TOLERANCE: f64 = 1e-6;
/// Independent k-means++ starts per fit; the lowest final inertia wins.
pub const N_INIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
    pub seed: u64,
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after each assignment step, ending with the final value.
    #[serde(default)]
    pub inertia_history: Vec<f64>,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

impl ClusterModel {
    /// Cluster id of a raw point.
    pub fn assign_point(&self, point: &[f64]) -> Result<usize, QepError> {
        if point.len() != self.dim {
            return Err(QepError::DimensionMismatch { expected: self.dim, found: point.len() });
        }
        Ok(nearest(&self.centroids, point).0)
    }

    pub fn assign(&self, v: &EmbeddingVector) -> Result<usize, QepError> {
        self.assign_point(v.values())
    }

    /// Sum of squared distances of `points` to their nearest centroid.
    pub fn inertia_of(&self, points: &[Vec<f64>]) -> f64 {
        points.iter().map(|p| nearest(&self.centroids, p).1).sum()
    }
}

pub fn assign_cluster(model: &ClusterModel, v: &EmbeddingVector) -> Result<usize, QepError> {
    model.assign(v)
}

pub fn fit_kmeans(vectors: &[EmbeddingVector], k: usize, seed: u64) -> Result<ClusterModel, QepError> {
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.values().to_vec()).collect();
    fit_kmeans_points(&points, k, seed)
}

fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.next_below(n as u64) as usize];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if *d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` a hair below `target`.
            pick.unwrap_or_else(|| d2.iter().rposition(|d| *d > 0.0).expect("total > 0"))
        } else {
            // Every point coincides with a chosen centroid.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.next_below(free.len() as u64) as usize]
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

pub fn fit_kmeans_points(points: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterModel, QepError> {
    if k < 2 {
        return Err(QepError::InvalidK(k));
    }
    if points.len() < k {
        return Err(QepError::TooFewPoints { points: points.len(), k });
    }
    let dim = points[0].len();
    if dim == 0 {
        return Err(QepError::DimensionMismatch { expected: 1, found: 0 });
    }
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(QepError::DimensionMismatch { expected: dim, found: p.len() });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(QepError::NonFinite);
    }

    // All starts draw from one stream, so the fit stays a function of seed.
    let mut rng = SplitMix64::new(seed);
    let mut best: Option<ClusterModel> = None;
    for _ in 0..N_INIT {
        let run = lloyd(points, k, dim, seed, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("N_INIT > 0"))
}

fn lloyd(points: &[Vec<f64>], k: usize, dim: usize, seed: u64, rng: &mut SplitMix64) -> ClusterModel {
    let mut centroids = kmeans_plus_plus(points, k, rng);
    let mut labels = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut inertia = 0.0;
        for (label, p) in labels.iter_mut().zip(points) {
            let (c, d) = nearest(&centroids, p);
            *label = c;
            inertia += d;
        }
        history.push(inertia);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (label, p) in labels.iter().zip(points) {
            counts[*label] += 1;
            for (s, v) in sums[*label].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut updated: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &n), old)| if n == 0 { old.clone() } else { s.into_iter().map(|v| v / n as f64).collect() })
            .collect();

        let mut taken = vec![false; points.len()];
        let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        for empty in empties {
            let far = (0..points.len())
                .filter(|&i| !taken[i])
                .map(|i| (i, squared_distance(&points[i], &updated[labels[i]])))
                .fold(None, |best: Option<(usize, f64)>, cand| match best {
                    Some(b) if b.1 >= cand.1 => Some(b),
                    _ => Some(cand),
                });
            if let Some((i, _)) = far {
                taken[i] = true;
                counts[labels[i]] -= 1;
                labels[i] = empty;
                counts[empty] = 1;
                updated[empty] = points[i].clone();
            }
        }

        let movement = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if movement < TOLERANCE {
            break;
        }
    }

    let inertia: f64 = points.iter().map(|p| nearest(&centroids, p).1).sum();
    history.push(inertia);
    ClusterModel { k, dim, centroids, seed, inertia, iterations_run: iterations, inertia_history: history }
}
