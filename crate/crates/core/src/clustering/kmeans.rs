//! Circular k-means: Lloyd iterations on unit vectors `(cos φ, sin φ)` with
//! cosine distance, used to initialise the von Mises EM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angle::wrap;
use crate::error::{CassError, Result};

#[derive(Debug, Clone, Copy)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            restarts: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CircularKMeans {
    pub centroids: Vec<f64>,
    pub assignment: Vec<usize>,
    /// Within-cluster cost `Σ_n 1 − cos(φ_n − centroid)`.
    pub cost: f64,
    /// Number of times an empty cluster had to be re-seeded.
    pub reseeds: usize,
}

impl CircularKMeans {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    /// Mean resultant length of each cluster (0 for empty clusters).
    pub fn resultant_lengths(&self, observations: &[f64]) -> Vec<f64> {
        let c = self.centroids.len();
        let mut s = vec![0.0; c];
        let mut co = vec![0.0; c];
        let mut n = vec![0usize; c];
        for (&phi, &a) in observations.iter().zip(&self.assignment) {
            s[a] += phi.sin();
            co[a] += phi.cos();
            n[a] += 1;
        }
        (0..c)
            .map(|j| {
                if n[j] == 0 {
                    0.0
                } else {
                    (s[j] * s[j] + co[j] * co[j]).sqrt() / n[j] as f64
                }
            })
            .collect()
    }
}

pub fn circular_kmeans(observations: &[f64], components: usize, seed: u64) -> Result<CircularKMeans> {
    circular_kmeans_with(observations, components, seed, KMeansConfig::default())
}

pub fn circular_kmeans_with(
    observations: &[f64],
    components: usize,
    seed: u64,
    cfg: KMeansConfig,
) -> Result<CircularKMeans> {
    if components == 0 {
        return Err(CassError::Config("circular k-means needs at least one cluster".into()));
    }
    if observations.len() < components {
        return Err(CassError::TooFewObservations {
            needed: components,
            got: observations.len(),
        });
    }
    let units: Vec<(f64, f64)> = observations.iter().map(|p| (p.cos(), p.sin())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<CircularKMeans> = None;
    for _ in 0..cfg.restarts.max(1) {
        let init = initial_centroids(observations, components, &mut rng);
        let run = lloyd(&units, init, cfg.max_iter);
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Picks distinct observation indices, preferring distinct values so that
/// heavily quantised data does not start with coincident centroids.
fn initial_centroids(observations: &[f64], components: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = observations.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(components);
    let mut attempts = 0;
    while chosen.len() < components {
        let i = rng.gen_range(0..n);
        attempts += 1;
        if chosen.contains(&i) {
            continue;
        }
        let duplicate = chosen.iter().any(|&j| observations[j] == observations[i]);
        if duplicate && attempts < 20 * n {
            continue;
        }
        chosen.push(i);
    }
    chosen.into_iter().map(|i| wrap(observations[i])).collect()
}

fn lloyd(units: &[(f64, f64)], mut centroids: Vec<f64>, max_iter: usize) -> CircularKMeans {
    let c = centroids.len();
    let mut assignment = vec![usize::MAX; units.len()];
    let mut reseeds = 0;
    for _ in 0..max_iter {
        let cents: Vec<(f64, f64)> = centroids.iter().map(|m| (m.cos(), m.sin())).collect();
        let mut changed = false;
        for (n, &(x, y)) in units.iter().enumerate() {
            let a = nearest(&cents, x, y);
            if assignment[n] != a {
                assignment[n] = a;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![(0.0, 0.0, 0usize); c];
        for (&(x, y), &a) in units.iter().zip(&assignment) {
            sums[a].0 += x;
            sums[a].1 += y;
            sums[a].2 += 1;
        }
        for j in 0..c {
            if sums[j].2 > 0 {
                centroids[j] = sums[j].1.atan2(sums[j].0);
            }
        }
        for j in 0..c {
            if sums[j].2 == 0 {
                // Re-seed at the point that is worst served by its own centroid.
                let far = farthest_point(units, &assignment, &centroids);
                centroids[j] = units[far].1.atan2(units[far].0);
                assignment[far] = j;
                reseeds += 1;
            }
        }
    }
    let cost = units
        .iter()
        .zip(&assignment)
        .map(|(&(x, y), &a)| 1.0 - (x * centroids[a].cos() + y * centroids[a].sin()))
        .sum::<f64>()
        .max(0.0);
    CircularKMeans {
        centroids: centroids.into_iter().map(wrap).collect(),
        assignment,
        cost,
        reseeds,
    }
}

#[inline]
fn nearest(cents: &[(f64, f64)], x: f64, y: f64) -> usize {
    let mut best = 0;
    let mut best_sim = f64::NEG_INFINITY;
    for (j, &(cx, cy)) in cents.iter().enumerate() {
        let sim = x * cx + y * cy;
        if sim > best_sim {
            best_sim = sim;
            best = j;
        }
    }
    best
}

fn farthest_point(units: &[(f64, f64)], assignment: &[usize], centroids: &[f64]) -> usize {
    let mut far = 0;
    let mut worst = f64::NEG_INFINITY;
    for (n, (&(x, y), &a)) in units.iter().zip(assignment).enumerate() {
        let d = 1.0 - (x * centroids[a].cos() + y * centroids[a].sin());
        if d > worst {
            worst = d;
            far = n;
        }
    }
    far
}
