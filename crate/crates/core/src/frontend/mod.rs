//! Auditory front-end: gammatone filterbank, inner-hair-cell envelopes,
//! per-unit ITD/ILD, ratemaps and spectral attributes.

pub mod binaural;
pub mod config;
pub mod gammatone;
pub mod ihc;
pub mod ratemap;
pub mod spectral;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use binaural::{extract_ild, extract_itd, BinauralFeature};
pub use config::FrontendConfig;
pub use gammatone::{design_filterbank, erb_rate, erb_rate_inverse, GammatoneBank};
pub use ihc::{ihc_envelope, IhcFilter};
pub use ratemap::compute_ratemap;
pub use spectral::{spectral_features, spectral_features_or_fallback, SpectralFeatureVector};

use crate::error::{CassError, Result};

/// Features of a run of consecutive frames, stored frame-major
/// (`index = k * channels + l`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditoryBlock {
    pub frames: usize,
    pub channels: usize,
    pub features: Vec<BinauralFeature>,
    /// Left/right averaged ratemap, non-negative.
    pub ratemaps: Vec<f64>,
    pub center_freqs: Vec<f64>,
    /// Head orientation (radians) while the block was recorded.
    pub head_orientation: f64,
}

impl AuditoryBlock {
    #[inline]
    pub fn feature(&self, k: usize, l: usize) -> &BinauralFeature {
        &self.features[k * self.channels + l]
    }

    #[inline]
    pub fn ratemap(&self, k: usize, l: usize) -> f64 {
        self.ratemaps[k * self.channels + l]
    }

    pub fn ratemap_frame(&self, k: usize) -> &[f64] {
        &self.ratemaps[k * self.channels..(k + 1) * self.channels]
    }

    pub fn valid_units(&self) -> usize {
        self.features.iter().filter(|f| f.valid).count()
    }

    /// One CSV row per unit: `k,l,itd,ild,ratemap,valid`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "k,l,itd_s,ild_db,ratemap,valid")?;
        for k in 0..self.frames {
            for l in 0..self.channels {
                let f = self.feature(k, l);
                writeln!(
                    out,
                    "{},{},{:e},{},{:e},{}",
                    k,
                    l,
                    f.itd,
                    f.ild,
                    self.ratemap(k, l),
                    u8::from(f.valid)
                )?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| CassError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| CassError::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct AuditoryFrontend {
    cfg: FrontendConfig,
    filterbank: GammatoneBank,
    ihc: IhcFilter,
}

impl AuditoryFrontend {
    pub fn new(cfg: FrontendConfig) -> Result<Self> {
        let filterbank = design_filterbank(&cfg)?;
        let ihc = IhcFilter::new(cfg.ihc_cutoff, cfg.sample_rate);
        Ok(Self { cfg, filterbank, ihc })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn center_freqs(&self) -> Vec<f64> {
        self.filterbank.center_freqs()
    }

    /// Centre of the ERB-rate range, used as the centroid of an empty frame.
    pub fn mid_frequency(&self) -> f64 {
        erb_rate_inverse(0.5 * (erb_rate(self.cfg.f_low) + erb_rate(self.cfg.f_high)))
    }

    /// Number of whole frames in `samples` samples.
    pub fn frame_count(&self, samples: usize) -> usize {
        samples / self.cfg.frame_samples()
    }

    /// Extra samples that should precede the analysed region so that filter
    /// transients have decayed.
    pub fn warmup_samples(&self) -> usize {
        (0.05 * self.cfg.sample_rate).round() as usize
    }

    /// Look-ahead consumed by the phase-compensated filterbank.
    pub fn lookahead_samples(&self) -> usize {
        self.filterbank.channels.iter().map(|c| c.delay).max().unwrap_or(0)
    }

    /// Analyses `frames` frames starting `offset` samples into the ear
    /// signals. Samples before `offset` and after the last frame only prime
    /// the filters.
    pub fn analyze(
        &self,
        left: &[f64],
        right: &[f64],
        offset: usize,
        frames: usize,
        head_orientation: f64,
    ) -> Result<AuditoryBlock> {
        self.analyze_impl(left, right, offset, frames, head_orientation, true)
    }

    /// All whole frames of the signals, no warm-up region.
    pub fn analyze_all(&self, left: &[f64], right: &[f64], head_orientation: f64) -> Result<AuditoryBlock> {
        let frames = self.frame_count(left.len().min(right.len()));
        self.analyze(left, right, 0, frames, head_orientation)
    }

    /// Ratemaps only (binaural cues are left invalid). Much cheaper than
    /// [`analyze`](Self::analyze); used to build classifier training data.
    pub fn analyze_monaural(&self, left: &[f64], right: &[f64], offset: usize, frames: usize) -> Result<AuditoryBlock> {
        self.analyze_impl(left, right, offset, frames, 0.0, false)
    }

    fn analyze_impl(
        &self,
        left: &[f64],
        right: &[f64],
        offset: usize,
        frames: usize,
        head_orientation: f64,
        binaural: bool,
    ) -> Result<AuditoryBlock> {
        if left.len() != right.len() {
            return Err(CassError::LengthMismatch(format!(
                "ear signals differ in length ({} vs {})",
                left.len(),
                right.len()
            )));
        }
        let fs = self.cfg.sample_rate;
        let m = self.cfg.frame_samples();
        let end = offset + frames * m;
        if end > left.len() {
            return Err(CassError::LengthMismatch(format!(
                "{frames} frames from sample {offset} need {end} samples, signal has {}",
                left.len()
            )));
        }
        let channels = self.filterbank.len();
        let max_lag = self.cfg.max_lag_samples();
        let mut features = vec![BinauralFeature::INVALID; frames * channels];
        let mut energies = vec![(0.0, 0.0); frames * channels];
        let mut ratemaps = vec![0.0; frames * channels];

        for (l, ch) in self.filterbank.channels.iter().enumerate() {
            let mut ihc_l = ch.filter(left);
            let mut ihc_r = ch.filter(right);
            self.ihc.apply(&mut ihc_l);
            self.ihc.apply(&mut ihc_r);

            if binaural {
                for k in 0..frames {
                    let span = offset + k * m..offset + (k + 1) * m;
                    let (fl, fr) = (&ihc_l[span.clone()], &ihc_r[span]);
                    let idx = k * channels + l;
                    energies[idx] = (binaural::frame_energy(fl), binaural::frame_energy(fr));
                    features[idx].itd = binaural::itd_lag(fl, fr, max_lag, self.cfg.itd_interpolation) / fs;
                }
            }

            ratemap::leaky_integrate(&mut ihc_l, fs, self.cfg.ratemap_tau);
            ratemap::leaky_integrate(&mut ihc_r, fs, self.cfg.ratemap_tau);
            let rl = ratemap::frame_means(&ihc_l[offset..end], m);
            let rr = ratemap::frame_means(&ihc_r[offset..end], m);
            for k in 0..frames {
                ratemaps[k * channels + l] = (0.5 * (rl[k] + rr[k])).max(0.0);
            }
        }

        if binaural {
            let peak = energies.iter().map(|(a, b)| a + b).fold(0.0, f64::max);
            let floor = self.cfg.energy_floor * peak;
            for (f, &(el, er)) in features.iter_mut().zip(&energies) {
                match binaural::ild_from_energies(el, er, 0.0) {
                    Some(ild) if el + er >= floor && peak > 0.0 => {
                        f.ild = ild;
                        f.valid = true;
                    }
                    _ => *f = BinauralFeature::INVALID,
                }
            }
        }

        Ok(AuditoryBlock {
            frames,
            channels,
            features,
            ratemaps,
            center_freqs: self.filterbank.center_freqs(),
            head_orientation,
        })
    }

    /// Spectral attributes of every frame of a (possibly masked) ratemap
    /// grid; `None` marks frames with no energy.
    pub fn frame_features(&self, ratemaps: &[f64], channels: usize) -> Vec<Option<SpectralFeatureVector>> {
        let freqs = self.center_freqs();
        ratemaps
            .chunks_exact(channels)
            .map(|frame| spectral_features(frame, &freqs))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> AuditoryFrontend {
        AuditoryFrontend::new(FrontendConfig {
            num_channels: 8,
            block_frames: 5,
            ..FrontendConfig::default()
        })
        .unwrap()
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn frames_partition_the_signal() {
        let fe = small();
        assert_eq!(fe.frame_count(882 * 5 + 881), 5);
        let x = noise(1, 882 * 3 + 100);
        let b = fe.analyze_all(&x, &x, 0.0).unwrap();
        assert_eq!(b.frames, 3);
        assert_eq!(b.features.len(), 3 * 8);
    }

    #[test]
    fn diotic_noise_has_zero_cues() {
        let fe = small();
        let x = noise(2, 882 * 4);
        let b = fe.analyze_all(&x, &x, 0.0).unwrap();
        assert!(b.features.iter().all(|f| f.valid && f.itd == 0.0 && f.ild == 0.0));
        assert!(b.ratemaps.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn silent_right_ear_invalidates_units() {
        let fe = small();
        let x = noise(3, 882 * 2);
        let b = fe.analyze_all(&x, &vec![0.0; x.len()], 0.0).unwrap();
        assert_eq!(b.valid_units(), 0);
    }

    #[test]
    fn common_gain_leaves_cues_unchanged() {
        let fe = small();
        let x = noise(4, 882 * 3);
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
        let a = fe.analyze_all(&x, &y, 0.0).unwrap();
        let gx: Vec<f64> = x.iter().map(|v| 7.0 * v).collect();
        let gy: Vec<f64> = y.iter().map(|v| 7.0 * v).collect();
        let b = fe.analyze_all(&gx, &gy, 0.0).unwrap();
        for (fa, fb) in a.features.iter().zip(&b.features) {
            assert_eq!(fa.itd, fb.itd);
            assert!((fa.ild - fb.ild).abs() < 1e-9);
            assert!((fa.ild - 20.0 * 2f64.log10()).abs() < 1e-6);
        }
    }

    #[test]
    fn offset_and_length_are_checked() {
        let fe = small();
        let x = noise(5, 882 * 3);
        assert!(fe.analyze(&x, &x, 100, 3, 0.0).is_err());
        assert!(fe.analyze(&x, &x[1..], 0, 1, 0.0).is_err());
        let b = fe.analyze(&x, &x, 882, 2, 0.25).unwrap();
        assert_eq!(b.head_orientation, 0.25);
    }

    #[test]
    fn csv_has_a_row_per_unit() {
        let fe = small();
        let x = noise(6, 882 * 2);
        let b = fe.analyze_all(&x, &x, 0.0).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 8);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0,"));
    }
}
