//! Fourth-order gammatone filterbank on the ERB-rate scale.
//!
//! Each channel is a cascade of four identical one-pole complex resonators.
//! Outputs are phase compensated: every channel is advanced so that the
//! envelope maximum of its impulse response lands at time zero, and the
//! carrier is rotated so that it peaks there in cosine phase.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::config::FrontendConfig;
use crate::error::Result;

const ORDER: i32 = 4;
/// Bandwidth scaling of a fourth-order gammatone relative to the ERB.
const BANDWIDTH_FACTOR: f64 = 1.019;

/// Glasberg & Moore ERB-rate (number of ERBs below `f`).
pub fn erb_rate(f: f64) -> f64 {
    21.4 * (4.37e-3 * f + 1.0).log10()
}

pub fn erb_rate_inverse(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 4.37e-3
}

/// Equivalent rectangular bandwidth at `f`, Hz.
pub fn erb(f: f64) -> f64 {
    24.7 * (4.37e-3 * f + 1.0)
}

/// `n` centre frequencies equally spaced in ERB-rate from `f_low` to `f_high`.
pub fn erb_space(f_low: f64, f_high: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (erb_rate(f_low), erb_rate(f_high));
    (0..n)
        .map(|i| match i {
            0 => f_low,
            _ if i == n - 1 => f_high,
            _ => erb_rate_inverse(lo + (hi - lo) * i as f64 / (n - 1) as f64),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GammatoneChannel {
    pub center_freq: f64,
    pole: Complex64,
    /// Advance in samples that aligns the envelope peak with time zero.
    pub delay: usize,
    /// Output scale and carrier rotation folded into one complex factor.
    rotation: Complex64,
}

impl GammatoneChannel {
    fn new(center_freq: f64, sample_rate: f64) -> Self {
        let bandwidth = BANDWIDTH_FACTOR * erb(center_freq);
        let radius = (-2.0 * PI * bandwidth / sample_rate).exp();
        let omega = 2.0 * PI * center_freq / sample_rate;
        let pole = Complex64::from_polar(radius, omega);
        // Discrete envelope (n+1)(n+2)(n+3) r^n peaks near 3 / -ln r.
        let envelope = |n: usize| {
            let n = n as f64;
            (n + 1.0) * (n + 2.0) * (n + 3.0) * radius.powf(n)
        };
        let guess = (3.0 / -radius.ln()).floor() as usize;
        let delay = [guess.saturating_sub(1), guess, guess + 1, guess + 2]
            .into_iter()
            .max_by(|&a, &b| envelope(a).total_cmp(&envelope(b)))
            .unwrap();
        let carrier = Complex64::from_polar(1.0, -omega * delay as f64);
        let mut ch = Self {
            center_freq,
            pole,
            delay,
            rotation: carrier,
        };
        let gain = ch.response(center_freq, sample_rate).norm();
        ch.rotation = carrier / gain;
        ch
    }

    /// Complex frequency response of the real-valued, phase-compensated
    /// channel at `f` Hz.
    pub fn response(&self, f: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * PI * f / sample_rate;
        let h = |w: f64| (Complex64::new(1.0, 0.0) - self.pole * Complex64::from_polar(1.0, -w)).powi(-ORDER);
        // Re{z} = (z + z*)/2; the conjugate branch sees the mirrored frequency.
        let rotated = (h(w) * self.rotation + (h(-w) * self.rotation).conj()) * 0.5;
        rotated * Complex64::from_polar(1.0, w * self.delay as f64)
    }

    /// Filters `input` and returns the phase-compensated real output of the
    /// same length. Samples needed beyond the end are taken as zero.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let n = input.len();
        let (pr, pi) = (self.pole.re, self.pole.im);
        let mut s = [Complex64::new(0.0, 0.0); ORDER as usize];
        let mut out = vec![0.0; n];
        let (rr, ri) = (self.rotation.re, self.rotation.im);
        let total = n + self.delay;
        for t in 0..total {
            let x = if t < n { input[t] } else { 0.0 };
            let mut re = x;
            let mut im = 0.0;
            for st in s.iter_mut() {
                let nr = re + pr * st.re - pi * st.im;
                let ni = im + pr * st.im + pi * st.re;
                st.re = nr;
                st.im = ni;
                re = nr;
                im = ni;
            }
            if t >= self.delay {
                out[t - self.delay] = re * rr - im * ri;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GammatoneBank {
    pub channels: Vec<GammatoneChannel>,
    pub sample_rate: f64,
}

impl GammatoneBank {
    pub fn center_freqs(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.center_freq).collect()
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

pub fn design_filterbank(cfg: &FrontendConfig) -> Result<GammatoneBank> {
    cfg.validate()?;
    let channels = erb_space(cfg.f_low, cfg.f_high, cfg.num_channels)
        .into_iter()
        .map(|fc| GammatoneChannel::new(fc, cfg.sample_rate))
        .collect();
    Ok(GammatoneBank {
        channels,
        sample_rate: cfg.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(n: usize) -> GammatoneBank {
        design_filterbank(&FrontendConfig {
            num_channels: n,
            ..FrontendConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn endpoints_and_spacing() {
        let fcs = bank(64).center_freqs();
        assert_eq!(fcs.len(), 64);
        assert_eq!(fcs[0], 80.0);
        assert_eq!(fcs[63], 8000.0);
        let steps: Vec<f64> = fcs.windows(2).map(|w| erb_rate(w[1]) - erb_rate(w[0])).collect();
        for s in &steps {
            assert!(*s > 0.0);
            assert!((s - steps[0]).abs() < 1e-9);
        }
        assert_eq!(bank(2).center_freqs(), vec![80.0, 8000.0]);
    }

    #[test]
    fn three_channel_midpoint() {
        // ERB-rate(80) = 21.4 log10(1.3496) ≈ 2.7847, ERB-rate(8000) = 21.4 log10(35.96) ≈ 33.287
        let lo = 21.4 * (1.0f64 + 0.3496).log10();
        let hi = 21.4 * (1.0f64 + 34.96).log10();
        let mid = (10f64.powf((lo + hi) / 2.0 / 21.4) - 1.0) / 4.37e-3;
        assert!((bank(3).center_freqs()[1] - mid).abs() < 1e-9);
        assert!((mid - 1366.1).abs() < 1.0, "{mid}");
    }

    #[test]
    fn unity_gain_at_center() {
        for ch in &bank(16).channels {
            let g = ch.response(ch.center_freq, 44_100.0).norm();
            assert!((g - 1.0).abs() < 1e-9);
            // well attenuated an octave away
            assert!(ch.response(ch.center_freq * 2.0, 44_100.0).norm() < 0.2);
        }
    }

    #[test]
    fn tone_passes_with_unit_amplitude() {
        let b = bank(8);
        let ch = &b.channels[4];
        let fs = 44_100.0;
        let x: Vec<f64> = (0..8820)
            .map(|n| (2.0 * PI * ch.center_freq * n as f64 / fs).sin())
            .collect();
        let y = ch.filter(&x);
        let peak = y[4410..8000].iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 0.01, "{peak}");
    }

    #[test]
    fn impulse_envelope_peaks_are_aligned() {
        let b = bank(16);
        let mut x = vec![0.0; 4000];
        x[1000] = 1.0;
        for ch in &b.channels {
            let y = ch.filter(&x);
            let peak = y
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap()
                .0;
            // the cosine-phase carrier puts the largest sample at the envelope peak
            let tolerance = (0.5 * 44_100.0 / ch.center_freq).ceil() as usize + 1;
            assert!(peak.abs_diff(1000) <= tolerance, "fc {} peak {peak}", ch.center_freq);
            assert!(y[1000] > 0.0, "fc {}", ch.center_freq);
        }
    }
}
