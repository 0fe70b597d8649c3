//! Level-independent spectral attributes of one ratemap frame.
//!
//! The frame is treated as a distribution over channel centre frequencies,
//! `p_l = r_l / Σ r`.

use serde::{Deserialize, Serialize};

const FLATNESS_EPS: f64 = 1e-12;

pub const NUM_SPECTRAL_FEATURES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeatureVector {
    /// Hz
    pub centroid: f64,
    /// Hz
    pub spread: f64,
    pub skewness: f64,
    /// Fourth standardised moment (not excess).
    pub kurtosis: f64,
    /// Geometric over arithmetic mean, in `[0, 1]`.
    pub flatness: f64,
    /// Peak over mean, at least 1.
    pub crest: f64,
    /// Shannon entropy normalised by `log L`, in `[0, 1]`.
    pub entropy: f64,
}

impl SpectralFeatureVector {
    pub fn to_array(&self) -> [f64; NUM_SPECTRAL_FEATURES] {
        [
            self.centroid,
            self.spread,
            self.skewness,
            self.kurtosis,
            self.flatness,
            self.crest,
            self.entropy,
        ]
    }

    /// Stand-in for an all-zero frame.
    pub fn fallback(mid_frequency: f64) -> Self {
        Self {
            centroid: mid_frequency,
            spread: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
            flatness: 1.0,
            crest: 1.0,
            entropy: 1.0,
        }
    }
}

/// Spectral attributes of a frame. Returns `None` for an all-zero frame; see
/// [`spectral_features_or_fallback`].
pub fn spectral_features(frame: &[f64], center_freqs: &[f64]) -> Option<SpectralFeatureVector> {
    assert_eq!(
        frame.len(),
        center_freqs.len(),
        "frame and centre frequencies differ in length"
    );
    let l = frame.len();
    let total: f64 = frame.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mean = total / l as f64;
    let p: Vec<f64> = frame.iter().map(|r| r / total).collect();

    let centroid: f64 = p.iter().zip(center_freqs).map(|(p, f)| p * f).sum();
    let moment = |k: i32| -> f64 {
        p.iter()
            .zip(center_freqs)
            .map(|(p, f)| p * (f - centroid).powi(k))
            .sum()
    };
    let variance = moment(2);
    let spread = variance.max(0.0).sqrt();
    let (skewness, kurtosis) = if spread > 1e-12 * centroid.abs().max(1.0) {
        (moment(3) / spread.powi(3), moment(4) / variance.powi(2))
    } else {
        (0.0, 0.0)
    };

    let log_geo = frame.iter().map(|r| (r + FLATNESS_EPS).ln()).sum::<f64>() / l as f64;
    let flatness = (log_geo.exp() / mean).clamp(0.0, 1.0);
    let crest = frame.iter().cloned().fold(0.0, f64::max) / mean;
    let entropy = (-p.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>() / (l as f64).ln()).clamp(0.0, 1.0);

    Some(SpectralFeatureVector {
        centroid,
        spread,
        skewness,
        kurtosis,
        flatness,
        crest,
        entropy,
    })
}

/// Like [`spectral_features`] but substitutes the fallback vector for
/// all-zero frames; the flag is true when the fallback was used.
pub fn spectral_features_or_fallback(
    frame: &[f64],
    center_freqs: &[f64],
    mid_frequency: f64,
) -> (SpectralFeatureVector, bool) {
    match spectral_features(frame, center_freqs) {
        Some(v) => (v, false),
        None => (SpectralFeatureVector::fallback(mid_frequency), true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn freqs(n: usize) -> Vec<f64> {
        super::super::gammatone::erb_space(80.0, 8000.0, n)
    }

    #[test]
    fn single_channel_frame() {
        let f = freqs(64);
        let mut frame = vec![0.0; 64];
        frame[20] = 3.0;
        let v = spectral_features(&frame, &f).unwrap();
        assert!((v.centroid - f[20]).abs() < 1e-9);
        assert_eq!(v.spread, 0.0);
        assert!(v.flatness < 1e-8);
        assert_eq!(v.entropy, 0.0);
        assert!((v.crest - 64.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_frame() {
        let f = freqs(32);
        let v = spectral_features(&vec![0.4; 32], &f).unwrap();
        assert!((v.flatness - 1.0).abs() < 1e-9);
        assert!((v.entropy - 1.0).abs() < 1e-12);
        assert!((v.crest - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_equal_peaks_center_between() {
        let f = freqs(16);
        let mut frame = vec![0.0; 16];
        frame[3] = 1.0;
        frame[11] = 1.0;
        let v = spectral_features(&frame, &f).unwrap();
        assert!((v.centroid - 0.5 * (f[3] + f[11])).abs() < 1e-9);
        assert!((v.spread - 0.5 * (f[11] - f[3])).abs() < 1e-9);
        assert!(v.skewness.abs() < 1e-9);
        assert!((v.kurtosis - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_frame_uses_fallback() {
        let f = freqs(8);
        assert!(spectral_features(&[0.0; 8], &f).is_none());
        let (v, flagged) = spectral_features_or_fallback(&[0.0; 8], &f, 1234.0);
        assert!(flagged);
        assert_eq!(v, SpectralFeatureVector::fallback(1234.0));
    }

    proptest! {
        #[test]
        fn ranges_and_scale_invariance(
            frame in prop::collection::vec(0.0f64..10.0, 16),
            scale in 0.01f64..100.0,
        ) {
            prop_assume!(frame.iter().sum::<f64>() > 1e-3);
            let f = freqs(16);
            let v = spectral_features(&frame, &f).unwrap();
            prop_assert!((0.0..=1.0).contains(&v.flatness));
            prop_assert!((0.0..=1.0).contains(&v.entropy));
            prop_assert!(v.crest >= 1.0 - 1e-12);
            let scaled: Vec<f64> = frame.iter().map(|r| r * scale).collect();
            let w = spectral_features(&scaled, &f).unwrap();
            for (a, b) in v.to_array().iter().zip(w.to_array()) {
                // flatness carries a tiny additive epsilon; everything else is exact up to rounding
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{} vs {}", a, b);
            }
        }
    }
}
