use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::bessel::ln_i0;
use crate::angle::wrap;
use crate::error::{CassError, Result};

/// Upper bound on any concentration. Beyond this a component is a delta at
/// the azimuth grid resolution and `I0` would overflow unscaled.
pub const KAPPA_MAX: f64 = 1e4;

/// Clamps a concentration into `[0, KAPPA_MAX]`, reporting whether it moved.
#[inline]
pub fn clamp_kappa(kappa: f64) -> (f64, bool) {
    if kappa.is_nan() || kappa > KAPPA_MAX {
        (KAPPA_MAX, true)
    } else if kappa < 0.0 {
        (0.0, true)
    } else {
        (kappa, false)
    }
}

/// Log density of the von Mises distribution.
#[inline]
pub fn ln_vm_pdf(phi: f64, mu: f64, kappa: f64) -> f64 {
    let (kappa, _) = clamp_kappa(kappa);
    kappa * (phi - mu).cos() - TAU.ln() - ln_i0(kappa)
}

/// Von Mises density `exp(κ cos(φ − μ)) / (2π I0(κ))`.
#[inline]
pub fn vm_pdf(phi: f64, mu: f64, kappa: f64) -> f64 {
    ln_vm_pdf(phi, mu, kappa).exp()
}

/// Inverse of the Bessel ratio by the Best–Fisher piecewise approximation.
///
/// Returns the concentration and a flag set when `r` fell outside `[0, 1)` or
/// the result had to be clamped to `KAPPA_MAX`.
pub fn approx_kappa_inverse_checked(r: f64) -> (f64, bool) {
    if r.is_nan() || r >= 1.0 {
        return (KAPPA_MAX, true);
    }
    if r <= 0.0 {
        return (0.0, r < 0.0);
    }
    let kappa = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        1.0 / (r.powi(3) - 4.0 * r.powi(2) + 3.0 * r)
    };
    clamp_kappa(kappa)
}

pub fn approx_kappa_inverse(r: f64) -> f64 {
    approx_kappa_inverse_checked(r).0
}

/// A mixture of `C` von Mises components on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VonMisesMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub kappas: Vec<f64>,
}

impl VonMisesMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, kappas: Vec<f64>) -> Result<Self> {
        let c = weights.len();
        if c == 0 || means.len() != c || kappas.len() != c {
            return Err(CassError::LengthMismatch(format!(
                "mixture needs equal, non-zero component counts (weights {}, means {}, kappas {})",
                c,
                means.len(),
                kappas.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(CassError::Config(
                "mixture weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(CassError::Config("mixture weights sum to zero".into()));
        }
        Ok(Self {
            weights: weights.iter().map(|w| w / total).collect(),
            means: means.into_iter().map(wrap).collect(),
            kappas: kappas.into_iter().map(|k| clamp_kappa(k).0).collect(),
        })
    }

    /// `C` identical uniform components.
    pub fn uniform(components: usize) -> Self {
        Self {
            weights: vec![1.0 / components as f64; components],
            means: vec![0.0; components],
            kappas: vec![0.0; components],
        }
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn pdf(&self, phi: f64) -> f64 {
        self.ln_pdf(phi).exp()
    }

    pub fn ln_pdf(&self, phi: f64) -> f64 {
        let mut terms = [0.0; 8];
        let mut heap;
        let terms: &mut [f64] = if self.components() <= terms.len() {
            &mut terms[..self.components()]
        } else {
            heap = vec![0.0; self.components()];
            &mut heap
        };
        for (c, t) in terms.iter_mut().enumerate() {
            *t = self.weights[c].ln() + ln_vm_pdf(phi, self.means[c], self.kappas[c]);
        }
        log_sum_exp(terms)
    }

    /// Index of the component with the smallest concentration; ties go to
    /// the lowest index.
    pub fn min_kappa_component(&self) -> usize {
        let mut best = 0;
        for (c, &k) in self.kappas.iter().enumerate().skip(1) {
            if k < self.kappas[best] {
                best = c;
            }
        }
        best
    }
}

/// Mixture log-likelihood `Σ_n log Σ_c π_c VM(φ_n | μ_c, κ_c)`.
pub fn mixture_loglik(observations: &[f64], mix: &VonMisesMixture) -> f64 {
    observations.iter().map(|&phi| mix.ln_pdf(phi)).sum()
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}
