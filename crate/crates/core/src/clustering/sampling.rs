use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Distribution;

use crate::angle::wrap;

/// Von Mises sampler using the Best–Fisher wrapped-Cauchy rejection scheme.
#[derive(Debug, Clone, Copy)]
pub struct VonMisesSampler {
    mu: f64,
    kappa: f64,
    r: f64,
}

impl VonMisesSampler {
    pub fn new(mu: f64, kappa: f64) -> Self {
        let kappa = kappa.max(0.0);
        let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
        let r = (1.0 + rho * rho) / (2.0 * rho);
        Self { mu, kappa, r }
    }
}

impl Distribution<f64> for VonMisesSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.kappa < 1e-8 {
            return rng.gen_range(-PI..PI);
        }
        loop {
            let u1: f64 = rng.gen();
            let z = (PI * u1).cos();
            let f = (1.0 + self.r * z) / (self.r + z);
            let c = self.kappa * (self.r - f);
            let u2: f64 = rng.gen();
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let u3: f64 = rng.gen();
                let theta = if u3 > 0.5 { f.acos() } else { -f.acos() };
                return wrap(self.mu + theta);
            }
        }
    }
}
