//! Full-covariance Gaussian mixture models fitted by EM.

use std::f64::consts::TAU;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CassError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    /// Convergence threshold on the mean per-sample log-likelihood.
    pub tol: f64,
    /// Added to every covariance diagonal.
    pub covariance_floor: f64,
    pub kmeans_max_iter: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            components: 16,
            max_iter: 100,
            tol: 1e-6,
            covariance_floor: 1e-6,
            kmeans_max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Component {
    weight: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    /// Inverse of the lower Cholesky factor.
    whitening: DMatrix<f64>,
    /// `ln w − (D/2) ln 2π − ln |L|`
    log_scale: f64,
}

impl Component {
    fn new(weight: f64, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let chol = Cholesky::new(covariance.clone())
            .ok_or_else(|| CassError::Numerical("covariance is not positive definite".into()))?;
        let l = chol.l();
        let log_det_half: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
        let whitening = l
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| CassError::Numerical("singular Cholesky factor".into()))?;
        Ok(Self {
            weight,
            mean,
            covariance,
            whitening,
            log_scale: weight.ln() - 0.5 * d as f64 * TAU.ln() - log_det_half,
        })
    }

    #[inline]
    fn ln_weighted_pdf(&self, x: &DVector<f64>) -> f64 {
        let z = &self.whitening * (x - &self.mean);
        self.log_scale - 0.5 * z.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmParams", into = "GmmParams")]
pub struct Gmm {
    dim: usize,
    components: Vec<Component>,
}

#[derive(Serialize, Deserialize)]
struct GmmParams {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Row-major.
    covariances: Vec<Vec<f64>>,
}

impl TryFrom<GmmParams> for Gmm {
    type Error = CassError;

    fn try_from(p: GmmParams) -> Result<Self> {
        let dim = p.means.first().map_or(0, Vec::len);
        Gmm::new(
            p.weights,
            p.means.into_iter().map(DVector::from_vec).collect(),
            p.covariances
                .into_iter()
                .map(|c| DMatrix::from_row_slice(dim, dim, &c))
                .collect(),
        )
    }
}

impl From<Gmm> for GmmParams {
    fn from(g: Gmm) -> Self {
        GmmParams {
            weights: g.weights(),
            means: g.components.iter().map(|c| c.mean.iter().cloned().collect()).collect(),
            covariances: g
                .components
                .iter()
                .map(|c| c.covariance.transpose().iter().cloned().collect())
                .collect(),
        }
    }
}

impl Gmm {
    pub fn new(weights: Vec<f64>, means: Vec<DVector<f64>>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covariances.len() {
            return Err(CassError::LengthMismatch(format!(
                "{} weights, {} means, {} covariances",
                weights.len(),
                means.len(),
                covariances.len()
            )));
        }
        let dim = means[0].len();
        if means.iter().any(|m| m.len() != dim) || covariances.iter().any(|c| c.shape() != (dim, dim)) {
            return Err(CassError::LengthMismatch("component dimensions differ".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(CassError::Numerical(
                "mixture weights must be non-negative with a positive sum".into(),
            ));
        }
        let components = weights
            .into_iter()
            .zip(means)
            .zip(covariances)
            .map(|((w, m), c)| Component::new(w / total, m, c))
            .collect::<Result<_>>()?;
        Ok(Self { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn mean(&self, c: usize) -> &DVector<f64> {
        &self.components[c].mean
    }

    pub fn covariance(&self, c: usize) -> &DMatrix<f64> {
        &self.components[c].covariance
    }

    pub fn ln_pdf(&self, x: &DVector<f64>) -> f64 {
        let mut buf = vec![0.0; self.components.len()];
        self.ln_joint(x, &mut buf)
    }

    /// Fills `out` with `ln w_c N(x; μ_c, Σ_c)` and returns their log-sum-exp.
    fn ln_joint(&self, x: &DVector<f64>, out: &mut [f64]) -> f64 {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.ln_weighted_pdf(x);
        }
        log_sum_exp(out)
    }

    /// Mean log-likelihood per sample.
    pub fn mean_loglik(&self, data: &[DVector<f64>]) -> f64 {
        data.iter().map(|x| self.ln_pdf(x)).sum::<f64>() / data.len() as f64
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub gmm: Gmm,
    /// Mean log-likelihood after each EM iteration.
    pub loglik_history: Vec<f64>,
    pub converged: bool,
}

fn sq_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm_squared()
}

/// Lloyd's k-means with k-means++ seeding. Returns centroids and labels.
pub fn kmeans(
    data: &[DVector<f64>],
    k: usize,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<DVector<f64>>, Vec<usize>) {
    let n = data.len();
    let mut centroids = vec![data[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen_range(0.0..total);
            d2.iter()
                .position(|&d| {
                    r -= d;
                    r < 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(data[next].clone());
        for (d, x) in d2.iter_mut().zip(data) {
            *d = d.min(sq_dist(x, &centroids[centroids.len() - 1]));
        }
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (label, x) in labels.iter_mut().zip(data) {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(x, &centroids[a]).total_cmp(&sq_dist(x, &centroids[b])))
                .unwrap();
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        let dim = data[0].len();
        let mut sums = vec![DVector::zeros(dim); k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            sums[l] += x;
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = &sums[c] / counts[c] as f64;
            } else {
                // reseed an empty cluster at the point farthest from its centroid
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&data[a], &centroids[labels[a]]).total_cmp(&sq_dist(&data[b], &centroids[labels[b]]))
                    })
                    .unwrap();
                centroids[c] = data[far].clone();
                labels[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (centroids, labels)
}

fn weighted_covariance(
    data: &[DVector<f64>],
    weights: &[f64],
    mean: &DVector<f64>,
    total: f64,
    floor: f64,
) -> DMatrix<f64> {
    let d = mean.len();
    let mut cov = DMatrix::zeros(d, d);
    for (x, &w) in data.iter().zip(weights) {
        if w > 0.0 {
            let diff = x - mean;
            cov.syger(w, &diff, &diff, 1.0);
        }
    }
    cov /= total;
    cov.fill_upper_triangle_with_lower_triangle();
    for i in 0..d {
        cov[(i, i)] += floor;
    }
    cov
}

/// Fits a GMM: k-means initialisation followed by EM until the mean
/// log-likelihood improves by less than `tol`.
pub fn fit_gmm(data: &[DVector<f64>], cfg: &GmmConfig, seed: u64) -> Result<GmmFit> {
    let n = data.len();
    let k = cfg.components;
    if k == 0 {
        return Err(CassError::Config("a mixture needs at least one component".into()));
    }
    if n < k {
        return Err(CassError::TooFewObservations { needed: k, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (centroids, labels) = kmeans(data, k, cfg.kmeans_max_iter, &mut rng);

    let ones = vec![1.0; n];
    let global_mean = data.iter().fold(DVector::zeros(data[0].len()), |acc, x| acc + x) / n as f64;
    let global_cov = weighted_covariance(data, &ones, &global_mean, n as f64, cfg.covariance_floor);

    let mut weights = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for (c, centroid) in centroids.iter().enumerate() {
        let member: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == c))).collect();
        let count: f64 = member.iter().sum();
        weights.push(count.max(1.0));
        covs.push(if count >= 2.0 {
            weighted_covariance(data, &member, centroid, count, cfg.covariance_floor)
        } else {
            global_cov.clone()
        });
    }
    let mut gmm = Gmm::new(weights, centroids, covs)?;

    let mut history = Vec::new();
    let mut converged = false;
    let mut resp = vec![0.0; n * k];
    for _ in 0..cfg.max_iter {
        // E step
        let mut total = 0.0;
        for (i, x) in data.iter().enumerate() {
            let row = &mut resp[i * k..(i + 1) * k];
            let norm = gmm.ln_joint(x, row);
            total += norm;
            row.iter_mut().for_each(|v| *v = (*v - norm).exp());
        }
        let loglik = total / n as f64;
        if let Some(&prev) = history.last() {
            if (loglik - prev) < cfg.tol {
                history.push(loglik);
                converged = true;
                break;
            }
        }
        history.push(loglik);

        // M step
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut covs = Vec::with_capacity(k);
        for c in 0..k {
            let r: Vec<f64> = (0..n).map(|i| resp[i * k + c]).collect();
            let nk: f64 = r.iter().sum();
            if nk < 1e-8 * n as f64 {
                // collapsed component: restart it on the worst-explained point
                let worst = (0..n)
                    .min_by(|&a, &b| gmm.ln_pdf(&data[a]).total_cmp(&gmm.ln_pdf(&data[b])))
                    .unwrap();
                weights.push(1.0 / n as f64);
                means.push(data[worst].clone());
                covs.push(global_cov.clone());
                continue;
            }
            let mean = data
                .iter()
                .zip(&r)
                .fold(DVector::zeros(data[0].len()), |acc, (x, &w)| acc + x * w)
                / nk;
            covs.push(weighted_covariance(data, &r, &mean, nk, cfg.covariance_floor));
            weights.push(nk / n as f64);
            means.push(mean);
        }
        gmm = Gmm::new(weights, means, covs)?;
    }
    if !converged {
        history.push(gmm.mean_loglik(data));
    }
    Ok(GmmFit {
        gmm,
        loglik_history: history,
        converged,
    })
}
