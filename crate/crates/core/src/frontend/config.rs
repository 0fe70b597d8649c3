use serde::{Deserialize, Serialize};

use crate::error::{CassError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontendConfig {
    pub sample_rate: f64,
    pub num_channels: usize,
    pub f_low: f64,
    pub f_high: f64,
    /// Non-overlapping rectangular frame length in seconds.
    pub frame_len: f64,
    /// Leaky-integrator time constant of the ratemap, seconds.
    pub ratemap_tau: f64,
    /// Frames per processing block.
    pub block_frames: usize,
    /// Units whose left+right frame energy falls below this fraction of the
    /// block's largest unit energy carry no usable binaural cue.
    pub energy_floor: f64,
    /// Largest interaural lag searched, seconds.
    pub max_itd: f64,
    /// Refine the integer-lag ITD by parabolic interpolation of the
    /// correlation peak.
    pub itd_interpolation: bool,
    /// Corner frequency of each of the two low-pass stages of the hair-cell
    /// model, Hz.
    pub ihc_cutoff: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            sample_rate: 44_100.0,
            num_channels: 64,
            f_low: 80.0,
            f_high: 8_000.0,
            frame_len: 0.020,
            ratemap_tau: 0.008,
            block_frames: 25,
            energy_floor: 1e-8,
            max_itd: 1.1e-3,
            itd_interpolation: true,
            ihc_cutoff: 1_000.0,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CassError::Config(m));
        if !(self.sample_rate > 0.0) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate));
        }
        if self.num_channels < 2 {
            return bad(format!("need at least 2 auditory channels, got {}", self.num_channels));
        }
        if !(self.f_low > 0.0 && self.f_low < self.f_high) {
            return bad(format!(
                "need 0 < f_low < f_high, got {} and {}",
                self.f_low, self.f_high
            ));
        }
        if self.f_high > self.sample_rate / 2.0 {
            return bad(format!(
                "f_high {} Hz exceeds the Nyquist frequency {} Hz",
                self.f_high,
                self.sample_rate / 2.0
            ));
        }
        let samples = self.frame_len * self.sample_rate;
        if !(samples >= 1.0 && (samples - samples.round()).abs() < 1e-6) {
            return bad(format!(
                "frame length must span a whole number of samples, got {samples}"
            ));
        }
        if self.block_frames == 0 {
            return bad("a block needs at least one frame".into());
        }
        if !(self.ratemap_tau > 0.0 && self.ihc_cutoff > 0.0 && self.max_itd >= 0.0 && self.energy_floor >= 0.0) {
            return bad("time constants, cutoffs, ITD range and energy floor must be non-negative".into());
        }
        Ok(())
    }

    pub fn frame_samples(&self) -> usize {
        (self.frame_len * self.sample_rate).round() as usize
    }

    pub fn block_samples(&self) -> usize {
        self.frame_samples() * self.block_frames
    }

    pub fn block_duration(&self) -> f64 {
        self.frame_len * self.block_frames as f64
    }

    pub fn max_lag_samples(&self) -> usize {
        (self.max_itd * self.sample_rate).floor() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_make_half_second_blocks() {
        let cfg = FrontendConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.frame_samples(), 882);
        assert!((cfg.block_duration() - 0.5).abs() < 1e-12);
        assert_eq!(cfg.max_lag_samples(), 48);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = FrontendConfig::default();
        for cfg in [
            FrontendConfig {
                f_high: 30_000.0,
                ..base.clone()
            },
            FrontendConfig {
                f_low: 9_000.0,
                ..base.clone()
            },
            FrontendConfig {
                num_channels: 1,
                ..base.clone()
            },
            FrontendConfig {
                frame_len: 0.0201,
                ..base.clone()
            },
            FrontendConfig {
                block_frames: 0,
                ..base.clone()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
