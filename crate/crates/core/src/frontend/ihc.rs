//! Inner-hair-cell envelope: half-wave rectification followed by two cascaded
//! one-pole low-pass stages. The cascade is second order with a non-negative
//! impulse response, so the output of a rectified signal never dips below 0.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy)]
pub struct IhcFilter {
    pole: f64,
}

impl IhcFilter {
    pub fn new(cutoff: f64, sample_rate: f64) -> Self {
        Self {
            pole: (-2.0 * PI * cutoff / sample_rate).exp(),
        }
    }

    /// Magnitude response of the low-pass cascade at `f` Hz.
    pub fn magnitude(&self, f: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * f / sample_rate;
        let p = self.pole;
        let stage = (1.0 - p) / (1.0 - 2.0 * p * w.cos() + p * p).sqrt();
        stage * stage
    }

    /// Rectifies and smooths `signal` in place.
    pub fn apply(&self, signal: &mut [f64]) {
        let p = self.pole;
        let g = 1.0 - p;
        let (mut s1, mut s2) = (0.0, 0.0);
        for x in signal.iter_mut() {
            s1 = g * x.max(0.0) + p * s1;
            s2 = g * s1 + p * s2;
            *x = s2;
        }
    }
}

pub fn ihc_envelope(signal: &[f64], cutoff: f64, sample_rate: f64) -> Vec<f64> {
    let mut out = signal.to_vec();
    IhcFilter::new(cutoff, sample_rate).apply(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 44_100.0;

    #[test]
    fn negative_input_gives_silence() {
        let out = ihc_envelope(&[-1.0, -0.5, -3.0, -1e-9], 1000.0, FS);
        assert!(out.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn dc_passes_with_unity_gain() {
        let out = ihc_envelope(&vec![0.7; 5000], 1000.0, FS);
        assert!((out[4999] - 0.7).abs() < 1e-12);
        assert!(out.iter().all(|&y| (0.0..=0.7 + 1e-15).contains(&y)));
    }

    #[test]
    fn rectified_tone_ripple_follows_magnitude_response() {
        // The 100 Hz fundamental of a half-wave rectified unit sine has
        // amplitude 1/2; after filtering it is scaled by |H(100 Hz)|.
        let f = IhcFilter::new(1000.0, FS);
        let n = 44_100;
        let x: Vec<f64> = (0..n).map(|t| (2.0 * PI * 100.0 * t as f64 / FS).sin()).collect();
        let y = ihc_envelope(&x, 1000.0, FS);
        let (mut re, mut im) = (0.0, 0.0);
        let span = 4410 * 9; // whole periods after the transient
        for (t, &v) in y.iter().enumerate().skip(n - span) {
            let w = 2.0 * PI * 100.0 * t as f64 / FS;
            re += v * w.cos();
            im += v * w.sin();
        }
        let amplitude = 2.0 * (re * re + im * im).sqrt() / span as f64;
        assert!((amplitude - 0.5 * f.magnitude(100.0, FS)).abs() < 1e-4, "{amplitude}");
        // and the 1 kHz corner of each stage gives the expected attenuation
        assert!((f.magnitude(0.0, FS) - 1.0).abs() < 1e-12);
        assert!(f.magnitude(5000.0, FS) < 0.05);
    }
}
