//! Seeded Lloyd k-means on 3D points.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error, PartialEq)]
pub enum KMeansError {
    #[error("k-means needs at least one point")]
    Empty,
    #[error("invalid k-means config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    /// Requested cluster count.
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Stop once no centroid coordinate moves by this much (meters).
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 3,
            max_iter: 100,
            seed: 0,
            tol: 1e-6,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<(), KMeansError> {
        if self.k == 0 {
            return Err(KMeansError::Config("k must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(KMeansError::Config("max_iter must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(KMeansError::Config("tol must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster id per input point, in `0..k`.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vector3<f64>>,
    /// Sum of squared distances to the assigned centroid (m²).
    pub inertia: f64,
    pub iterations_run: usize,
    /// Effective cluster count: `min(cfg.k, points.len())`.
    pub k: usize,
    /// Indices of the points that seeded the centroids.
    pub init_indices: Vec<usize>,
}

impl Clustering {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Assign each point to its nearest centroid (ties to the lowest id) and
/// return the resulting inertia.
fn assign(points: &[Vector3<f64>], centroids: &[Vector3<f64>], out: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, slot) in points.iter().zip(out.iter_mut()) {
        let mut best = 0;
        let mut best_d = (p - centroids[0]).norm_squared();
        for (c, centroid) in centroids.iter().enumerate().skip(1) {
            let d = (p - centroid).norm_squared();
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        *slot = best;
        inertia += best_d;
    }
    inertia
}

/// Recompute centroids as member means. An empty cluster moves to the point
/// farthest from its previous centroid. Returns the max-norm movement.
fn update(points: &[Vector3<f64>], assignments: &[usize], centroids: &mut [Vector3<f64>]) -> f64 {
    let k = centroids.len();
    let mut sums = vec![Vector3::zeros(); k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        sums[a] += p;
        counts[a] += 1;
    }
    let mut movement: f64 = 0.0;
    for c in 0..k {
        let next = if counts[c] > 0 {
            sums[c] / counts[c] as f64
        } else {
            let old = centroids[c];
            let mut far = 0;
            let mut far_d = -1.0;
            for (i, p) in points.iter().enumerate() {
                let d = (p - old).norm_squared();
                if d > far_d {
                    far = i;
                    far_d = d;
                }
            }
            points[far]
        };
        movement = movement.max((next - centroids[c]).amax());
        centroids[c] = next;
    }
    movement
}

/// Cluster `points` with Lloyd's algorithm.
///
/// Centroids start at `k` distinct input points drawn uniformly by
/// [`SplitMix64`] seeded with `cfg.seed`. If there are fewer points than `k`,
/// `k` drops to the point count.
pub fn kmeans(points: &[Vector3<f64>], cfg: &KMeansConfig) -> Result<Clustering, KMeansError> {
    kmeans_traced(points, cfg, None)
}

/// [`kmeans`], additionally recording the inertia of every assignment step
/// into `trace` (one entry per iteration plus the final assignment).
pub fn kmeans_traced(
    points: &[Vector3<f64>],
    cfg: &KMeansConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<Clustering, KMeansError> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(KMeansError::Empty);
    }
    let k = cfg.k.min(points.len());
    let mut rng = SplitMix64::new(cfg.seed);
    let init_indices = rng.sample_indices(points.len(), k);
    let mut centroids: Vec<Vector3<f64>> = init_indices.iter().map(|&i| points[i]).collect();
    let mut assignments = vec![0usize; points.len()];

    let mut iterations_run = 0;
    while iterations_run < cfg.max_iter {
        let inertia = assign(points, &centroids, &mut assignments);
        if let Some(t) = trace.as_deref_mut() {
            t.push(inertia);
        }
        let movement = update(points, &assignments, &mut centroids);
        iterations_run += 1;
        if movement < cfg.tol || movement == 0.0 {
            break;
        }
    }
    let inertia = assign(points, &centroids, &mut assignments);
    if let Some(t) = trace {
        t.push(inertia);
    }

    Ok(Clustering {
        assignments,
        centroids,
        inertia,
        iterations_run,
        k,
        init_indices,
    })
}
