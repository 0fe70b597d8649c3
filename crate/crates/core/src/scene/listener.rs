//! Head-rotation policies.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angle::wrap;
use crate::clustering::VonMisesMixture;
use crate::error::CassError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    None,
    Random,
    Feedback,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::None, Policy::Random, Policy::Feedback];

    pub fn name(self) -> &'static str {
        match self {
            Policy::None => "none",
            Policy::Random => "random",
            Policy::Feedback => "feedback",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = CassError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CassError::Config(format!("unknown policy `{s}` (expected none, random or feedback)")))
    }
}

/// `(ψ_prev + u·π/180)` clamped to `[lo, hi]`, with `u ~ N(0, 1)`.
pub fn random_rotation<R: Rng + ?Sized>(psi: f64, limits: (f64, f64), rng: &mut R) -> f64 {
    let u: f64 = rng.sample(StandardNormal);
    random_step(psi, u, limits)
}

/// Random rotation for a given standard-normal draw `u`.
pub fn random_step(psi: f64, u: f64, limits: (f64, f64)) -> f64 {
    (psi + u * PI / 180.0).clamp(limits.0, limits.1)
}

/// Turns the head by `α` times the wrapped offset to the mean of the least
/// concentrated component.
pub fn feedback_rotation(psi: f64, mix: &VonMisesMixture, alpha: f64, limits: (f64, f64)) -> f64 {
    let target = mix.means[mix.min_kappa_component()];
    feedback_step(psi, target, alpha, limits)
}

pub fn feedback_step(psi: f64, target: f64, alpha: f64, limits: (f64, f64)) -> f64 {
    (psi + alpha * wrap(target - psi)).clamp(limits.0, limits.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListenerState {
    /// Look direction, radians.
    pub psi: f64,
    pub policy: Policy,
    pub alpha: f64,
    /// Allowed look directions, radians.
    pub limits: (f64, f64),
}

impl ListenerState {
    /// Look direction for the next block, given the mixture fitted on the
    /// block just completed (if any).
    pub fn advance<R: Rng + ?Sized>(&mut self, last_mixture: Option<&VonMisesMixture>, rng: &mut R) -> f64 {
        self.psi = match (self.policy, last_mixture) {
            (Policy::None, _) => self.psi,
            (Policy::Random, _) => random_rotation(self.psi, self.limits, rng),
            (Policy::Feedback, Some(mix)) => feedback_rotation(self.psi, mix, self.alpha, self.limits),
            (Policy::Feedback, None) => self.psi,
        };
        self.psi
    }
}
