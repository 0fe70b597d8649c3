use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::bessel::ln_i0;
use super::kmeans::{circular_kmeans_with, CircularKMeans, KMeansConfig};
use super::vonmises::{approx_kappa_inverse, clamp_kappa, log_sum_exp, VonMisesMixture};
use crate::angle::wrap;
use crate::error::{CassError, Result};

/// Mixture weights below this are treated as a collapsed component.
pub const WEIGHT_UNDERFLOW: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Stop once the log-likelihood gain of an iteration drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_restarts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            kmeans_max_iter: 100,
            kmeans_restarts: 5,
        }
    }
}

/// Posterior component memberships, one row of `C` entries per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    components: usize,
    gamma: Vec<f64>,
}

impl Responsibilities {
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn len(&self) -> usize {
        self.gamma.len() / self.components
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.gamma[n * self.components..(n + 1) * self.components]
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub mixture: VonMisesMixture,
    pub responsibilities: Responsibilities,
    /// Log-likelihood of the initial parameters followed by one entry per
    /// completed iteration.
    pub loglik_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Iterations at which a collapsed component was reset to uniform.
    pub reinitialized: Vec<usize>,
}

impl EmFit {
    pub fn loglik(&self) -> f64 {
        *self.loglik_history.last().expect("history is never empty")
    }
}

/// Initial mixture from a hard clustering: cluster fractions as weights,
/// centroids as means and concentrations from the clusters' resultant lengths.
pub fn init_from_kmeans(observations: &[f64], km: &CircularKMeans) -> VonMisesMixture {
    let n = observations.len() as f64;
    let sizes = km.cluster_sizes();
    let lengths = km.resultant_lengths(observations);
    let weights: Vec<f64> = sizes.iter().map(|&s| (s as f64 / n).max(WEIGHT_UNDERFLOW)).collect();
    let kappas = lengths.iter().map(|&r| approx_kappa_inverse(r)).collect();
    VonMisesMixture::new(weights, km.centroids.clone(), kappas).expect("k-means output is well formed")
}

/// Circular k-means initialisation followed by EM.
pub fn fit_mixture(observations: &[f64], components: usize, seed: u64, cfg: &EmConfig) -> Result<EmFit> {
    let km = circular_kmeans_with(
        observations,
        components,
        seed,
        KMeansConfig {
            max_iter: cfg.kmeans_max_iter,
            restarts: cfg.kmeans_restarts,
        },
    )?;
    let init = init_from_kmeans(observations, &km);
    em_fit(observations, &init, cfg)
}

/// Expectation-maximisation for a von Mises mixture with a fixed number of
/// components.
///
/// The concentration update uses the Best–Fisher inverse of the Bessel ratio.
/// Because that inverse is approximate, the update is only accepted when it
/// does not lower the component's expected complete-data log-likelihood;
/// otherwise the previous concentration is kept, which keeps the observed
/// log-likelihood non-decreasing.
pub fn em_fit(observations: &[f64], init: &VonMisesMixture, cfg: &EmConfig) -> Result<EmFit> {
    let c = init.components();
    let n = observations.len();
    if n < c {
        return Err(CassError::TooFewObservations { needed: c, got: n });
    }
    let trig: Vec<(f64, f64)> = observations.iter().map(|p| (p.cos(), p.sin())).collect();
    let mut mix = init.clone();
    let mut gamma = vec![0.0; n * c];
    let mut ll = e_step(&trig, &mix, &mut gamma);
    if !ll.is_finite() {
        return Err(CassError::Numerical(
            "initial mixture has non-finite log-likelihood".into(),
        ));
    }
    let mut history = vec![ll];
    let mut iterations = 0;
    let mut converged = false;
    let mut reinitialized = Vec::new();

    while iterations < cfg.max_iter {
        iterations += 1;
        let reset = m_step(&trig, &gamma, &mut mix);
        if reset {
            reinitialized.push(iterations);
        }
        let new_ll = e_step(&trig, &mix, &mut gamma);
        history.push(new_ll);
        let gain = new_ll - ll;
        ll = new_ll;
        if !reset && gain < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(EmFit {
        mixture: mix,
        responsibilities: Responsibilities { components: c, gamma },
        loglik_history: history,
        iterations,
        converged,
        reinitialized,
    })
}

/// Fills `gamma` with responsibilities under `mix` and returns the
/// log-likelihood of the data.
fn e_step(trig: &[(f64, f64)], mix: &VonMisesMixture, gamma: &mut [f64]) -> f64 {
    let c = mix.components();
    let consts: Vec<(f64, f64, f64)> = (0..c)
        .map(|j| {
            let k = mix.kappas[j];
            (
                k * mix.means[j].cos(),
                k * mix.means[j].sin(),
                mix.weights[j].ln() - TAU.ln() - ln_i0(k),
            )
        })
        .collect();
    let mut total = 0.0;
    let mut terms = vec![0.0; c];
    for (row, &(cs, sn)) in gamma.chunks_exact_mut(c).zip(trig) {
        for (t, &(kc, ks, off)) in terms.iter_mut().zip(&consts) {
            // κ cos(φ − μ) = κ cos μ cos φ + κ sin μ sin φ
            *t = off + kc * cs + ks * sn;
        }
        let lse = log_sum_exp(&terms);
        total += lse;
        for (g, t) in row.iter_mut().zip(&terms) {
            *g = (t - lse).exp();
        }
    }
    total
}

/// Updates `mix` in place. Returns true if a collapsed component was reset.
fn m_step(trig: &[(f64, f64)], gamma: &[f64], mix: &mut VonMisesMixture) -> bool {
    let c = mix.components();
    let n = trig.len() as f64;
    let mut reset = false;
    for j in 0..c {
        let (mut w, mut s, mut co) = (0.0, 0.0, 0.0);
        for (row, &(cs, sn)) in gamma.chunks_exact(c).zip(trig) {
            let g = row[j];
            w += g;
            s += g * sn;
            co += g * cs;
        }
        let weight = w / n;
        if weight < WEIGHT_UNDERFLOW || w <= 0.0 {
            mix.weights[j] = 1.0 / c as f64;
            mix.means[j] = 0.0;
            mix.kappas[j] = 0.0;
            reset = true;
            continue;
        }
        mix.weights[j] = weight;
        let mu = s.atan2(co);
        mix.means[j] = wrap(mu);
        // weighted mean of cos(φ − μ) equals the resultant length at the optimum μ
        let r = ((s * s + co * co).sqrt() / w).clamp(0.0, 1.0);
        let proposal = approx_kappa_inverse(r);
        let previous = mix.kappas[j];
        let q = |k: f64| k * r - ln_i0(k);
        mix.kappas[j] = clamp_kappa(if q(proposal) >= q(previous) { proposal } else { previous }).0;
    }
    if reset {
        let total: f64 = mix.weights.iter().sum();
        for w in &mut mix.weights {
            *w /= total;
        }
    }
    reset
}

/// Maps the components of `current` onto those of `previous` by minimal total
/// circular distance between means. `result[i]` is the index in `current`
/// that continues component `i` of `previous`.
pub fn align_components(previous: &VonMisesMixture, current: &VonMisesMixture) -> Vec<usize> {
    crate::harness::metrics::match_streams(&current.means, &previous.means)
}

impl VonMisesMixture {
    /// Returns the mixture with components reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> VonMisesMixture {
        VonMisesMixture {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            means: order.iter().map(|&i| self.means[i]).collect(),
            kappas: order.iter().map(|&i| self.kappas[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::{circular_distance, rad};
    use crate::clustering::vonmises::mixture_loglik;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Distribution;

    fn sample(rng: &mut ChaCha8Rng, mu: f64, kappa: f64, n: usize) -> Vec<f64> {
        let vm = super::super::sampling::VonMisesSampler::new(mu, kappa);
        (0..n).map(|_| vm.sample(rng)).collect()
    }

    #[test]
    fn single_component_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let obs = sample(&mut rng, rad(30.0), 20.0, 1600);
        let fit = fit_mixture(&obs, 1, 1, &EmConfig::default()).unwrap();
        assert!(circular_distance(fit.mixture.means[0], rad(30.0)) < rad(2.0));
        assert!(
            (fit.mixture.kappas[0] - 20.0).abs() < 0.15 * 20.0,
            "{}",
            fit.mixture.kappas[0]
        );
        assert!((fit.mixture.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglik_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..20 {
            let c = 2 + trial % 3;
            let mut obs = Vec::new();
            for _ in 0..c {
                let mu = rng.gen_range(-3.1..3.1);
                let kappa = rng.gen_range(0.5..30.0);
                obs.extend(sample(&mut rng, mu, kappa, 500 / c));
            }
            let fit = fit_mixture(&obs, c, trial as u64, &EmConfig::default()).unwrap();
            for w in fit.loglik_history.windows(2) {
                assert!(w[1] - w[0] >= -1e-9, "trial {trial}: {} -> {}", w[0], w[1]);
            }
            assert!((fit.loglik() - mixture_loglik(&obs, &fit.mixture)).abs() < 1e-8);
        }
    }

    #[test]
    fn responsibilities_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut obs = sample(&mut rng, 1.0, 5.0, 100);
        obs.extend(sample(&mut rng, -2.0, 5.0, 100));
        let fit = fit_mixture(&obs, 2, 0, &EmConfig::default()).unwrap();
        for n in 0..fit.responsibilities.len() {
            let row = fit.responsibilities.row(n);
            assert!(row.iter().all(|g| (0.0..=1.0).contains(g)));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((fit.mixture.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut obs = sample(&mut rng, rad(-60.0), 15.0, 300);
        obs.extend(sample(&mut rng, rad(90.0), 8.0, 200));
        let shift = rad(123.0);
        let rotated: Vec<f64> = obs.iter().map(|p| wrap(p + shift)).collect();
        let a = fit_mixture(&obs, 2, 17, &EmConfig::default()).unwrap().mixture;
        let b = fit_mixture(&rotated, 2, 17, &EmConfig::default()).unwrap().mixture;
        let shifted = VonMisesMixture {
            means: a.means.iter().map(|m| wrap(m + shift)).collect(),
            ..a.clone()
        };
        let order = align_components(&shifted, &b);
        let b = b.permuted(&order);
        for j in 0..2 {
            assert!(circular_distance(b.means[j], shifted.means[j]) < 1e-6);
            assert!((b.kappas[j] - a.kappas[j]).abs() < 1e-4 * a.kappas[j].max(1.0));
            assert!((b.weights[j] - a.weights[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn kappa_estimates_tighten_with_more_data() {
        let truth = 10.0;
        let mut err = Vec::new();
        for &n in &[100usize, 1600] {
            let mut total = 0.0;
            for seed in 0..20 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let obs = sample(&mut rng, 0.4, truth, n);
                let fit = fit_mixture(&obs, 1, seed, &EmConfig::default()).unwrap();
                total += (fit.mixture.kappas[0] - truth).abs();
            }
            err.push(total / 20.0);
        }
        assert!(err[1] < err[0], "{err:?}");
    }

    #[test]
    fn collapsed_component_is_reset() {
        // All mass sits on one point; the second component starts far away
        // with a huge concentration so its responsibilities vanish.
        let obs = vec![0.0; 50];
        let init = VonMisesMixture::new(vec![0.5, 0.5], vec![0.0, 3.0], vec![5.0, 5000.0]).unwrap();
        let fit = em_fit(&obs, &init, &EmConfig::default()).unwrap();
        assert!(!fit.reinitialized.is_empty());
        assert!((fit.mixture.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
