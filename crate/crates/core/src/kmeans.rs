//! Lloyd's K-means with K-means++ seeding.
//!
//! The core is generic over a [`Dissimilarity`] so the same loop can run
//! with plain Euclidean distance (the normal path, on feature-mapped data)
//! or with an explicit diagonal weighting of the norm.

use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::ChaCha8Rng;

/// Squared dissimilarity between a point and a centroid.
pub trait Dissimilarity: Sync {
    fn sq_dist(&self, a: &[f64], b: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Dissimilarity for Euclidean {
    #[inline]
    fn sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    }
}

/// `sum_j factors[j] * (a_j - b_j)^2`, i.e. the weighted norm with
/// `factors[j] = w_j^p`.
#[derive(Debug, Clone)]
pub struct WeightedEuclidean {
    pub factors: Vec<f64>,
}

impl Dissimilarity for WeightedEuclidean {
    #[inline]
    fn sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.factors)
            .map(|((x, y), w)| w * (x - y) * (x - y))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop when no centroid moves more than `tol` times the bounding-box
    /// diagonal of the data.
    pub tol: f64,
    /// Independent restarts; the lowest-inertia run is kept.
    pub n_init: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iter: 300,
            tol: 1e-4,
            n_init: 1,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_n_init(mut self, n_init: usize) -> Self {
        self.n_init = n_init;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if self.k > n_samples {
            return Err(Error::invalid(format!(
                "k = {} exceeds the number of samples ({n_samples})",
                self.k
            )));
        }
        if self.max_iter == 0 || self.n_init == 0 {
            return Err(Error::invalid("max_iter and n_init must be >= 1"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid("tol must be a finite non-negative number"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringModel {
    pub centroids: FeatureMatrix,
    /// Cluster index of each input row, in input order.
    pub assignments: Vec<usize>,
    /// Sum of (unsquared) distances from each point to its centroid.
    pub objective: f64,
    /// Sum of squared distances; the quantity Lloyd iterations decrease.
    pub inertia: f64,
    pub n_iter: usize,
    pub converged: bool,
}

/// Row indices picked by K-means++: the first uniformly, each next one with
/// probability proportional to its squared distance to the nearest row
/// already picked. Indices are always distinct; when every remaining row
/// coincides with a picked one the next pick is uniform over the unpicked
/// rows.
pub fn kmeanspp_indices<D: Dissimilarity, R: Rng + ?Sized>(
    features: &FeatureMatrix,
    k: usize,
    rng: &mut R,
    metric: &D,
) -> Result<Vec<usize>> {
    let m = features.n_rows();
    if k == 0 || k > m {
        return Err(Error::invalid(format!("k = {k} must be in [1, {m}]")));
    }
    let mut picked = Vec::with_capacity(k);
    picked.push(rng.random_range(0..m));
    let mut nearest: Vec<f64> = features
        .rows()
        .map(|x| metric.sq_dist(x, features.row(picked[0])))
        .collect();
    nearest[picked[0]] = 0.0;

    while picked.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut choice = None;
            let mut last_positive = 0;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 {
                    acc += d;
                    last_positive = i;
                    if acc > target {
                        choice = Some(i);
                        break;
                    }
                }
            }
            // rounding can leave target just above the final partial sum
            choice.unwrap_or(last_positive)
        } else {
            let free: Vec<usize> = (0..m).filter(|i| !picked.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        picked.push(next);
        let c = features.row(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(metric.sq_dist(features.row(i), c));
        }
        nearest[next] = 0.0;
    }
    Ok(picked)
}

pub fn kmeanspp_init<R: Rng + ?Sized>(
    features: &FeatureMatrix,
    k: usize,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    let idx = kmeanspp_indices(features, k, rng, &Euclidean)?;
    Ok(features.select_rows(&idx))
}

/// Nearest centroid per point; ties go to the lowest cluster index.
pub fn e_step(features: &FeatureMatrix, centroids: &FeatureMatrix) -> Vec<usize> {
    e_step_with(features, centroids, &Euclidean)
}

pub fn e_step_with<D: Dissimilarity>(
    features: &FeatureMatrix,
    centroids: &FeatureMatrix,
    metric: &D,
) -> Vec<usize> {
    features
        .rows()
        .map(|x| nearest_centroid(x, centroids, metric).0)
        .collect()
}

fn nearest_centroid<D: Dissimilarity>(
    x: &[f64],
    centroids: &FeatureMatrix,
    metric: &D,
) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.rows().enumerate() {
        let d = metric.sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn cluster_means(
    features: &FeatureMatrix,
    assignments: &[usize],
    k: usize,
) -> (FeatureMatrix, Vec<usize>) {
    let mut sums = FeatureMatrix::zeros(k, features.n_cols());
    let mut counts = vec![0usize; k];
    for (x, &a) in features.rows().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(x) {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            for s in sums.row_mut(c) {
                *s /= n as f64;
            }
        }
    }
    (sums, counts)
}

/// Cluster means. An empty cluster's centroid is moved onto the point that
/// lies farthest from its own cluster mean (each point used at most once).
pub fn m_step(features: &FeatureMatrix, assignments: &[usize], k: usize) -> FeatureMatrix {
    m_step_with(features, assignments, k, &Euclidean)
}

pub fn m_step_with<D: Dissimilarity>(
    features: &FeatureMatrix,
    assignments: &[usize],
    k: usize,
    metric: &D,
) -> FeatureMatrix {
    let (mut centroids, counts) = cluster_means(features, assignments, k);
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() {
        return centroids;
    }
    let mut dist: Vec<f64> = features
        .rows()
        .zip(assignments)
        .map(|(x, &a)| metric.sq_dist(x, centroids.row(a)))
        .collect();
    for c in empty {
        let far = argmax(&dist);
        centroids.row_mut(c).copy_from_slice(features.row(far));
        dist[far] = f64::NEG_INFINITY;
    }
    centroids
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Gives every empty cluster the point farthest from its current centroid,
/// taken from a cluster that can spare it, and moves the centroid there.
fn fill_empty_clusters<D: Dissimilarity>(
    features: &FeatureMatrix,
    assignments: &mut [usize],
    centroids: &mut FeatureMatrix,
    metric: &D,
) {
    let k = centroids.n_rows();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let dist: Vec<f64> = features
            .rows()
            .zip(assignments.iter())
            .map(|(x, &a)| {
                if counts[a] > 1 {
                    metric.sq_dist(x, centroids.row(a))
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let far = argmax(&dist);
        counts[assignments[far]] -= 1;
        assignments[far] = c;
        counts[c] = 1;
        centroids.row_mut(c).copy_from_slice(features.row(far));
    }
}

fn inertia_of<D: Dissimilarity>(
    features: &FeatureMatrix,
    centroids: &FeatureMatrix,
    assignments: &[usize],
    metric: &D,
) -> (f64, f64) {
    features
        .rows()
        .zip(assignments)
        .map(|(x, &a)| metric.sq_dist(x, centroids.row(a)))
        .fold((0.0, 0.0), |(obj, inertia), d| {
            (obj + d.sqrt(), inertia + d)
        })
}

/// Lloyd iterations from the given centroids.
///
/// Returns the model and the inertia recorded after every E-step and every
/// M-step, in order; the sequence is non-increasing.
pub fn lloyd<D: Dissimilarity>(
    features: &FeatureMatrix,
    init: FeatureMatrix,
    config: &KMeansConfig,
    metric: &D,
) -> Result<(ClusteringModel, Vec<f64>)> {
    config.validate(features.n_rows())?;
    if init.n_rows() != config.k || init.n_cols() != features.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: config.k * features.n_cols(),
            actual: init.n_rows() * init.n_cols(),
        });
    }
    let threshold = config.tol * features.bounding_diameter();
    let mut centroids = init;
    let mut previous: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut n_iter = 0;
    let mut converged = false;

    let assign = |centroids: &mut FeatureMatrix| {
        let mut a = e_step_with(features, centroids, metric);
        fill_empty_clusters(features, &mut a, centroids, metric);
        a
    };

    let mut assignments = loop {
        let a = assign(&mut centroids);
        trace.push(inertia_of(features, &centroids, &a, metric).1);
        if previous.as_ref() == Some(&a) {
            converged = true;
            break a;
        }
        if n_iter == config.max_iter {
            break a;
        }
        n_iter += 1;
        let updated = m_step_with(features, &a, config.k, metric);
        trace.push(inertia_of(features, &updated, &a, metric).1);
        let shift = centroids
            .rows()
            .zip(updated.rows())
            .map(|(old, new)| metric.sq_dist(old, new))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = updated;
        if shift <= threshold {
            converged = true;
            let a = assign(&mut centroids);
            trace.push(inertia_of(features, &centroids, &a, metric).1);
            break a;
        }
        previous = Some(a);
    };
    assignments.shrink_to_fit();
    let (objective, inertia) = inertia_of(features, &centroids, &assignments, metric);
    Ok((
        ClusteringModel {
            centroids,
            assignments,
            objective,
            inertia,
            n_iter,
            converged,
        },
        trace,
    ))
}

/// Runs `n_init` seeded restarts and keeps the lowest-inertia model.
///
/// Restart `r` draws from the ChaCha8 stream `r` of `config.seed`, so a given
/// restart sees the same seeding regardless of `n_init`.
pub fn fit(features: &FeatureMatrix, config: &KMeansConfig) -> Result<ClusteringModel> {
    fit_with(features, config, &Euclidean)
}

pub fn fit_with<D: Dissimilarity>(
    features: &FeatureMatrix,
    config: &KMeansConfig,
    metric: &D,
) -> Result<ClusteringModel> {
    config.validate(features.n_rows())?;
    let mut best: Option<ClusteringModel> = None;
    for restart in 0..config.n_init {
        let mut rng = restart_rng(config.seed, restart);
        let idx = kmeanspp_indices(features, config.k, &mut rng, metric)?;
        let (model, _) = lloyd(features, features.select_rows(&idx), config, metric)?;
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}
