//! Azimuth estimation per time-frequency unit.

pub mod bank;

pub use bank::{azimuth_grid, feature_vector, train_bank, BankTrainingConfig, Gaussian2, GaussianAzimuthBank};

use serde::{Deserialize, Serialize};

use crate::angle::wrap;
use crate::error::{CassError, Result};
use crate::frontend::{AuditoryBlock, BinauralFeature};

/// Below this every likelihood is numerically zero in double precision
/// (`exp` underflows).
const LN_UNDERFLOW: f64 = -708.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub probabilities: Vec<f64>,
    /// Every likelihood underflowed; the posterior is uniform.
    pub underflow: bool,
}

/// Log-likelihood of `feature` under every azimuth model of `channel`.
pub fn log_likelihoods(feature: &BinauralFeature, channel: usize, bank: &GaussianAzimuthBank) -> Vec<f64> {
    let x = feature_vector(feature);
    bank.channel_models(channel).iter().map(|g| g.ln_pdf(x)).collect()
}

/// Normalises log-likelihoods into a posterior under a uniform prior.
pub fn normalize_log_likelihoods(lls: &[f64]) -> Posterior {
    let m = lls.len();
    let peak = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak >= LN_UNDERFLOW) {
        return Posterior {
            probabilities: vec![1.0 / m as f64; m],
            underflow: true,
        };
    }
    let mut p: Vec<f64> = lls.iter().map(|&v| (v - peak).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Posterior {
        probabilities: p,
        underflow: false,
    }
}

pub fn posterior_azimuth(feature: &BinauralFeature, channel: usize, bank: &GaussianAzimuthBank) -> Posterior {
    normalize_log_likelihoods(&log_likelihoods(feature, channel, bank))
}

/// Index of the largest value; ties go to the lowest index. The flag is
/// true when the maximum is shared.
pub fn argmax_lowest(values: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tie = false;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
            tie = false;
        } else if v == values[best] {
            tie = true;
        }
    }
    (best, tie)
}

/// Maximum-likelihood relative azimuth and its tie flag.
pub fn ml_relative_azimuth(posterior: &[f64], bank: &GaussianAzimuthBank) -> (f64, bool) {
    let (m, tie) = argmax_lowest(posterior);
    (bank.azimuths[m], tie)
}

/// Head-relative azimuth to absolute azimuth for head orientation `psi`.
#[inline]
pub fn to_absolute(relative: f64, psi: f64) -> f64 {
    wrap(relative + psi)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AzimuthObservations {
    /// Absolute azimuths in `[−π, π)`.
    pub azimuths: Vec<f64>,
    /// `(k, l)` origin of each observation.
    pub positions: Vec<(usize, usize)>,
    /// Valid units left out because every likelihood underflowed.
    pub underflow: usize,
}

impl AzimuthObservations {
    pub fn len(&self) -> usize {
        self.azimuths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.azimuths.is_empty()
    }
}

/// ML absolute azimuth of every valid unit, channel by channel with the
/// frame index varying fastest.
pub fn stack_block(block: &AuditoryBlock, bank: &GaussianAzimuthBank) -> Result<AzimuthObservations> {
    if bank.channels != block.channels {
        return Err(CassError::LengthMismatch(format!(
            "bank has {} channels, block has {}",
            bank.channels, block.channels
        )));
    }
    let mut obs = AzimuthObservations::default();
    for l in 0..block.channels {
        for k in 0..block.frames {
            let f = block.feature(k, l);
            if !f.valid {
                continue;
            }
            let lls = log_likelihoods(f, l, bank);
            let (m, _) = argmax_lowest(&lls);
            if !(lls[m] >= LN_UNDERFLOW) {
                obs.underflow += 1;
                continue;
            }
            obs.azimuths.push(to_absolute(bank.azimuths[m], block.head_orientation));
            obs.positions.push((k, l));
        }
    }
    if obs.is_empty() {
        return Err(CassError::EmptyObservations);
    }
    Ok(obs)
}
