use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CassError, Result};
use crate::frontend::{AuditoryFrontend, BinauralFeature, FrontendConfig};
use crate::io;
use crate::scene::renderer::BinauralRenderer;

pub const BANK_FORMAT_VERSION: u32 = 1;

/// Bivariate Gaussian over `(ITD in ms, ILD in dB)`.
///
/// ITDs are modelled in milliseconds so that the covariance floor is
/// meaningful for both cues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GaussianParams", into = "GaussianParams")]
pub struct Gaussian2 {
    mean: [f64; 2],
    /// `[σ_ττ, σ_τδ, σ_δδ]`
    cov: [f64; 3],
    inv: [f64; 3],
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianParams {
    mean: [f64; 2],
    cov: [f64; 3],
}

impl From<GaussianParams> for Gaussian2 {
    fn from(p: GaussianParams) -> Self {
        Gaussian2::new(p.mean, p.cov)
    }
}

impl From<Gaussian2> for GaussianParams {
    fn from(g: Gaussian2) -> Self {
        GaussianParams {
            mean: g.mean,
            cov: g.cov,
        }
    }
}

impl Gaussian2 {
    pub fn new(mean: [f64; 2], cov: [f64; 3]) -> Self {
        let [a, b, c] = cov;
        let det = a * c - b * b;
        Self {
            mean,
            cov,
            inv: [c / det, -b / det, a / det],
            log_norm: -(TAU.ln()) - 0.5 * det.ln(),
        }
    }

    /// Maximum-likelihood fit with `floor` added to the diagonal, so the
    /// smallest eigenvalue is at least `floor`.
    pub fn fit(samples: &[[f64; 2]], floor: f64) -> Self {
        let n = samples.len() as f64;
        let mx = samples.iter().map(|s| s[0]).sum::<f64>() / n;
        let my = samples.iter().map(|s| s[1]).sum::<f64>() / n;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for s in samples {
            let (dx, dy) = (s[0] - mx, s[1] - my);
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        Self::new([mx, my], [sxx / n + floor, sxy / n, syy / n + floor])
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn covariance(&self) -> [f64; 3] {
        self.cov
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        let [a, b, c] = self.cov;
        0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt()
    }

    #[inline]
    pub fn ln_pdf(&self, x: [f64; 2]) -> f64 {
        let (dx, dy) = (x[0] - self.mean[0], x[1] - self.mean[1]);
        let [ia, ib, ic] = self.inv;
        self.log_norm - 0.5 * (ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy)
    }
}

/// Observation vector of a binaural feature as modelled by the bank.
#[inline]
pub fn feature_vector(f: &BinauralFeature) -> [f64; 2] {
    [f.itd * 1e3, f.ild]
}

/// Azimuth grid with one Gaussian per (channel, azimuth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianAzimuthBank {
    pub version: u32,
    /// Equidistant over `[−π, π)`, starting at `−π`.
    pub azimuths: Vec<f64>,
    pub channels: usize,
    /// Channel-major: `models[l * M + m]`.
    pub models: Vec<Gaussian2>,
    pub config_hash: String,
}

/// Equidistant grid of `m` azimuths covering `[−π, π)` once.
pub fn azimuth_grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| -PI + TAU * i as f64 / m as f64).collect()
}

impl GaussianAzimuthBank {
    pub fn new(azimuths: Vec<f64>, channels: usize, models: Vec<Gaussian2>, config_hash: String) -> Result<Self> {
        if models.len() != azimuths.len() * channels || azimuths.is_empty() {
            return Err(CassError::LengthMismatch(format!(
                "{} models for {} azimuths x {} channels",
                models.len(),
                azimuths.len(),
                channels
            )));
        }
        Ok(Self {
            version: BANK_FORMAT_VERSION,
            azimuths,
            channels,
            models,
            config_hash,
        })
    }

    pub fn num_azimuths(&self) -> usize {
        self.azimuths.len()
    }

    pub fn model(&self, channel: usize, azimuth: usize) -> &Gaussian2 {
        &self.models[channel * self.azimuths.len() + azimuth]
    }

    pub fn channel_models(&self, channel: usize) -> &[Gaussian2] {
        let m = self.azimuths.len();
        &self.models[channel * m..(channel + 1) * m]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bank: Self = io::read_json(path, "azimuth bank (run `train-loc` first)")?;
        if bank.version != BANK_FORMAT_VERSION {
            return Err(CassError::Config(format!(
                "azimuth bank format {} is not supported (expected {})",
                bank.version, BANK_FORMAT_VERSION
            )));
        }
        Ok(bank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankTrainingConfig {
    pub num_azimuths: usize,
    /// Seconds of white noise rendered per azimuth.
    pub duration: f64,
    pub seed: u64,
    pub covariance_floor: f64,
    pub min_frames: usize,
}

impl Default for BankTrainingConfig {
    fn default() -> Self {
        Self {
            num_azimuths: 360,
            duration: 10.0,
            seed: 0x5eed,
            covariance_floor: 1e-6,
            min_frames: 10,
        }
    }
}

/// Fits the bank from white noise rendered at every grid azimuth with the
/// head looking straight ahead.
pub fn train_bank<R: BinauralRenderer + ?Sized>(
    renderer: &R,
    frontend: &AuditoryFrontend,
    cfg: &BankTrainingConfig,
) -> Result<GaussianAzimuthBank> {
    let fcfg = frontend.config();
    if (renderer.sample_rate() - fcfg.sample_rate).abs() > 1e-9 {
        return Err(CassError::Config(format!(
            "renderer runs at {} Hz but the front-end expects {} Hz",
            renderer.sample_rate(),
            fcfg.sample_rate
        )));
    }
    if cfg.num_azimuths == 0 {
        return Err(CassError::Config("azimuth grid must not be empty".into()));
    }
    let grid = azimuth_grid(cfg.num_azimuths);
    let channels = fcfg.num_channels;
    let frames = frontend.frame_count((cfg.duration * fcfg.sample_rate).round() as usize);
    let warmup = frontend.warmup_samples();
    let total = warmup + frames * fcfg.frame_samples() + frontend.lookahead_samples();

    let per_azimuth: Vec<Result<Vec<Gaussian2>>> = grid
        .par_iter()
        .enumerate()
        .map(|(m, &azimuth)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (m as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let noise: Vec<f64> = (0..total)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.1 * z
                })
                .collect();
            let (left, right) = renderer.render(&noise, azimuth);
            let block = frontend.analyze(&left, &right, warmup, frames, 0.0)?;
            (0..channels)
                .map(|l| {
                    let samples: Vec<[f64; 2]> = (0..frames)
                        .map(|k| block.feature(k, l))
                        .filter(|f| f.valid)
                        .map(feature_vector)
                        .collect();
                    if samples.len() < cfg.min_frames {
                        return Err(CassError::Training(format!(
                            "cell (channel {l}, azimuth {:.1} deg) has {} valid frames, need {}",
                            azimuth.to_degrees(),
                            samples.len(),
                            cfg.min_frames
                        )));
                    }
                    Ok(Gaussian2::fit(&samples, cfg.covariance_floor))
                })
                .collect()
        })
        .collect();

    let mut models = vec![None; grid.len() * channels];
    for (m, cell) in per_azimuth.into_iter().enumerate() {
        for (l, g) in cell?.into_iter().enumerate() {
            models[l * grid.len() + m] = Some(g);
        }
    }
    let models = models.into_iter().map(|g| g.expect("every cell filled")).collect();
    let hash = io::config_hash(&(fcfg, cfg, renderer.describe()));
    GaussianAzimuthBank::new(grid, channels, models, hash)
}

/// Hash identifying a bank trained with these settings.
pub fn bank_hash(frontend: &FrontendConfig, cfg: &BankTrainingConfig, renderer: &dyn BinauralRenderer) -> String {
    io::config_hash(&(frontend, cfg, renderer.describe()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_circle_once() {
        let g = azimuth_grid(360);
        assert_eq!(g[0], -PI);
        assert!((g[1] - g[0] - 1f64.to_radians()).abs() < 1e-12);
        assert!(*g.last().unwrap() < PI);
        let g2 = azimuth_grid(2);
        assert_eq!(g2, vec![-PI, 0.0]);
    }

    #[test]
    fn constant_samples_give_floor_covariance() {
        let g = Gaussian2::fit(&vec![[0.3, -2.0]; 20], 1e-6);
        assert!((g.mean()[0] - 0.3).abs() < 1e-12 && g.mean()[1] == -2.0);
        let c = g.covariance();
        assert!((c[0] - 1e-6).abs() < 1e-18 && c[1].abs() < 1e-18 && (c[2] - 1e-6).abs() < 1e-18);
        assert!(g.ln_pdf([0.3, -2.0]).is_finite());
        assert!(g.min_eigenvalue() >= 1e-6 - 1e-18);
    }

    #[test]
    fn perfectly_correlated_samples_stay_positive_definite() {
        let s: Vec<[f64; 2]> = (0..30).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let g = Gaussian2::fit(&s, 1e-6);
        assert!(g.min_eigenvalue() >= 1e-6 * 0.999);
        assert!(g.ln_pdf([3.0, 6.0]).is_finite());
    }

    #[test]
    fn ln_pdf_matches_closed_form() {
        let g = Gaussian2::new([1.0, 2.0], [2.0, 0.5, 1.0]);
        let x = [0.3, 2.7];
        let det: f64 = 2.0 * 1.0 - 0.25;
        let (dx, dy) = (x[0] - 1.0, x[1] - 2.0);
        let q = (1.0 * dx * dx - 2.0 * 0.5 * dx * dy + 2.0 * dy * dy) / det;
        let expected = -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * q;
        assert!((g.ln_pdf(x) - expected).abs() < 1e-12);
    }

    #[test]
    fn serde_restores_cached_inverse() {
        let g = Gaussian2::new([1.0, 2.0], [2.0, 0.5, 1.0]);
        let json = serde_json::to_string(&g).unwrap();
        let back: Gaussian2 = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }
}
