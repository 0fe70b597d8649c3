//! Binaural rendering of mono sources at a given azimuth relative to the head.
//!
//! Relative azimuth is measured counter-clockwise from the look direction, so
//! positive angles are on the listener's left.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::angle::{circular_distance, wrap};
use crate::error::{CassError, Result};
use crate::io;

pub trait BinauralRenderer: Send + Sync {
    fn sample_rate(&self) -> f64;

    /// Adds the ear signals of `signal` placed at `relative_azimuth` into
    /// `left` and `right`, which must be as long as `signal`.
    fn render_into(&self, signal: &[f64], relative_azimuth: f64, left: &mut [f64], right: &mut [f64]);

    /// Stable description of the renderer and its parameters, used to tie
    /// trained artifacts to the renderer that produced them.
    fn describe(&self) -> String;

    fn render(&self, signal: &[f64], relative_azimuth: f64) -> (Vec<f64>, Vec<f64>) {
        let mut left = vec![0.0; signal.len()];
        let mut right = vec![0.0; signal.len()];
        self.render_into(signal, relative_azimuth, &mut left, &mut right);
        (left, right)
    }
}

/// Renders several sources at absolute azimuths for a head looking at
/// `look_direction` and sums them per ear.
pub fn render_block<R: BinauralRenderer + ?Sized>(
    renderer: &R,
    sources: &[(&[f64], f64)],
    look_direction: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = sources.first().map_or(0, |(s, _)| s.len());
    if sources.iter().any(|(s, _)| s.len() != len) {
        return Err(CassError::LengthMismatch(
            "source segments must have equal length".into(),
        ));
    }
    let mut left = vec![0.0; len];
    let mut right = vec![0.0; len];
    for &(signal, azimuth) in sources {
        renderer.render_into(signal, wrap(azimuth - look_direction), &mut left, &mut right);
    }
    Ok((left, right))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphericalHeadConfig {
    pub sample_rate: f64,
    /// metres
    pub head_radius: f64,
    /// metres per second
    pub speed_of_sound: f64,
    /// Ear positions at ± this angle from the look direction, degrees.
    pub ear_angle: f64,
    /// Shadow gain at the least exposed incidence angle.
    pub alpha_min: f64,
    /// Incidence angle (degrees) at which the shadow gain is smallest.
    pub theta_min: f64,
    /// Half length of the windowed-sinc fractional delay, taps.
    pub delay_half_taps: usize,
}

impl Default for SphericalHeadConfig {
    fn default() -> Self {
        Self {
            sample_rate: 44_100.0,
            head_radius: 0.0875,
            speed_of_sound: 343.0,
            ear_angle: 100.0,
            alpha_min: 0.1,
            theta_min: 150.0,
            delay_half_taps: 16,
        }
    }
}

/// Parametric spherical head: Woodworth ITD applied as a fractional delay and
/// a one-pole/one-zero head-shadow filter per ear whose high-frequency gain
/// depends on the angle between the source and that ear.
#[derive(Debug, Clone)]
pub struct SphericalHead {
    cfg: SphericalHeadConfig,
    bulk_delay: f64,
}

impl SphericalHead {
    pub fn new(cfg: SphericalHeadConfig) -> Self {
        let max_itd = cfg.head_radius * (FRAC_PI_2 + 1.0) / cfg.speed_of_sound * cfg.sample_rate;
        let bulk_delay = (0.5 * max_itd).ceil() + cfg.delay_half_taps as f64;
        Self { cfg, bulk_delay }
    }

    pub fn config(&self) -> &SphericalHeadConfig {
        &self.cfg
    }

    /// Woodworth ITD in seconds, positive when the left ear leads.
    pub fn itd(&self, relative_azimuth: f64) -> f64 {
        let lateral = relative_azimuth.sin().asin();
        self.cfg.head_radius * (lateral + lateral.sin()) / self.cfg.speed_of_sound
    }

    /// High-frequency shadow gain for an ear, given the source-to-ear angle.
    pub fn shadow_alpha(&self, incidence: f64) -> f64 {
        let a = self.cfg.alpha_min;
        let theta_min = self.cfg.theta_min.to_radians();
        (1.0 + a / 2.0) + (1.0 - a / 2.0) * (incidence / theta_min * PI).cos()
    }

    /// Shadow gains `(left, right)` at relative azimuth.
    pub fn ear_alphas(&self, relative_azimuth: f64) -> (f64, f64) {
        let ear = self.cfg.ear_angle.to_radians();
        (
            self.shadow_alpha(circular_distance(relative_azimuth, ear)),
            self.shadow_alpha(circular_distance(-relative_azimuth, ear)),
        )
    }

    /// Magnitude of an ear's shadow filter at `f` Hz.
    pub fn shadow_magnitude(&self, alpha: f64, f: f64) -> f64 {
        let (b0, b1, a1) = self.shadow_coefficients(alpha);
        let w = 2.0 * PI * f / self.cfg.sample_rate;
        let num = ((b0 + b1 * w.cos()).powi(2) + (b1 * w.sin()).powi(2)).sqrt();
        let den = ((1.0 + a1 * w.cos()).powi(2) + (a1 * w.sin()).powi(2)).sqrt();
        num / den
    }

    /// Bilinear transform of `(1 + α s / 2ω0) / (1 + s / 2ω0)`, `ω0 = c / a`.
    fn shadow_coefficients(&self, alpha: f64) -> (f64, f64, f64) {
        let omega0 = self.cfg.speed_of_sound / self.cfg.head_radius;
        let k = self.cfg.sample_rate / omega0;
        let norm = 1.0 + k;
        ((1.0 + alpha * k) / norm, (1.0 - alpha * k) / norm, (1.0 - k) / norm)
    }

    fn ear(&self, signal: &[f64], delay: f64, alpha: f64, out: &mut [f64]) {
        let taps = fractional_delay_taps(delay, self.cfg.delay_half_taps);
        let (b0, b1, a1) = self.shadow_coefficients(alpha);
        let start = delay.floor() as isize - self.cfg.delay_half_taps as isize + 1;
        let (mut x1, mut y1) = (0.0, 0.0);
        for (n, o) in out.iter_mut().enumerate() {
            let mut x = 0.0;
            for (j, &h) in taps.iter().enumerate() {
                let idx = n as isize - start - j as isize;
                if idx >= 0 && (idx as usize) < signal.len() {
                    x += h * signal[idx as usize];
                }
            }
            let y = b0 * x + b1 * x1 - a1 * y1;
            x1 = x;
            y1 = y;
            *o += y;
        }
    }
}

impl Default for SphericalHead {
    fn default() -> Self {
        Self::new(SphericalHeadConfig::default())
    }
}

impl BinauralRenderer for SphericalHead {
    fn sample_rate(&self) -> f64 {
        self.cfg.sample_rate
    }

    fn render_into(&self, signal: &[f64], relative_azimuth: f64, left: &mut [f64], right: &mut [f64]) {
        assert!(left.len() == signal.len() && right.len() == signal.len());
        let half_itd = 0.5 * self.itd(relative_azimuth) * self.cfg.sample_rate;
        let (alpha_l, alpha_r) = self.ear_alphas(relative_azimuth);
        self.ear(signal, self.bulk_delay - half_itd, alpha_l, left);
        self.ear(signal, self.bulk_delay + half_itd, alpha_r, right);
    }

    fn describe(&self) -> String {
        format!(
            "spherical-head {}",
            serde_json::to_string(&self.cfg).expect("plain config serialises")
        )
    }
}

/// Blackman-windowed sinc taps for a delay of `delay` samples. Tap `j`
/// multiplies input sample `n - (floor(delay) - half + 1) - j`.
fn fractional_delay_taps(delay: f64, half: usize) -> Vec<f64> {
    let base = delay.floor();
    let frac = delay - base;
    let len = 2 * half;
    let mut taps: Vec<f64> = (0..len)
        .map(|j| {
            // offset of this tap from the ideal (fractional) delay
            let t = j as f64 - (half as f64 - 1.0) - frac;
            let sinc = if t.abs() < 1e-12 {
                1.0
            } else {
                (PI * t).sin() / (PI * t)
            };
            let x = (t + half as f64) / (2.0 * half as f64);
            let window = if (0.0..=1.0).contains(&x) {
                0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()
            } else {
                0.0
            };
            sinc * window
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Measured head-related impulse responses, one stereo WAV per azimuth. Files
/// are named by their azimuth in degrees (e.g. `-90.wav`, `30.wav`); the
/// nearest measured direction is used.
#[derive(Debug, Clone)]
pub struct MeasuredHrir {
    sample_rate: f64,
    source: PathBuf,
    responses: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl MeasuredHrir {
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| CassError::io(dir, e))?;
        let mut responses = Vec::new();
        let mut sample_rate = None;
        for entry in entries {
            let path = entry.map_err(|e| CassError::io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("wav") {
                continue;
            }
            let Some(azimuth) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<f64>().ok())
            else {
                continue;
            };
            let wav = io::read_wav(&path)?;
            if wav.channels.len() != 2 {
                return Err(CassError::Config(format!("HRIR `{}` is not stereo", path.display())));
            }
            if *sample_rate.get_or_insert(wav.sample_rate) != wav.sample_rate {
                return Err(CassError::Config("HRIR files disagree on sample rate".into()));
            }
            let mut ch = wav.channels.into_iter();
            responses.push((wrap(azimuth.to_radians()), ch.next().unwrap(), ch.next().unwrap()));
        }
        if responses.is_empty() {
            return Err(CassError::MissingArtifact {
                path: dir.to_path_buf(),
                hint: "expected stereo WAV files named by azimuth in degrees".into(),
            });
        }
        responses.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            sample_rate: sample_rate.unwrap(),
            source: dir.to_path_buf(),
            responses,
        })
    }

    pub fn azimuths(&self) -> Vec<f64> {
        self.responses.iter().map(|r| r.0).collect()
    }

    fn nearest(&self, azimuth: f64) -> &(f64, Vec<f64>, Vec<f64>) {
        self.responses
            .iter()
            .min_by(|a, b| circular_distance(a.0, azimuth).total_cmp(&circular_distance(b.0, azimuth)))
            .expect("at least one response")
    }
}

impl BinauralRenderer for MeasuredHrir {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn render_into(&self, signal: &[f64], relative_azimuth: f64, left: &mut [f64], right: &mut [f64]) {
        let (_, hl, hr) = self.nearest(relative_azimuth);
        convolve_add(signal, hl, left);
        convolve_add(signal, hr, right);
    }

    fn describe(&self) -> String {
        format!(
            "measured-hrir {} ({} directions)",
            self.source.display(),
            self.responses.len()
        )
    }
}

fn convolve_add(signal: &[f64], ir: &[f64], out: &mut [f64]) {
    for (n, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &h) in ir.iter().enumerate().take(n + 1) {
            acc += h * signal[n - j];
        }
        *o += acc;
    }
}
