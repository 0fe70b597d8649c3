//! Seeded synthetic sound classes.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::CassError;
use crate::seed;

/// RMS level of every generated signal.
pub const SIGNAL_RMS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoundClass {
    Speech,
    Siren,
    DogBark,
    Engine,
    Piano,
}

impl SoundClass {
    pub const ALL: [SoundClass; 5] = [
        SoundClass::Speech,
        SoundClass::Siren,
        SoundClass::DogBark,
        SoundClass::Engine,
        SoundClass::Piano,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SoundClass::Speech => "speech",
            SoundClass::Siren => "siren",
            SoundClass::DogBark => "dog-bark",
            SoundClass::Engine => "engine",
            SoundClass::Piano => "piano",
        }
    }
}

impl fmt::Display for SoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SoundClass {
    type Err = CassError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SoundClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CassError::Config(format!("unknown sound class `{s}`")))
    }
}

/// `duration` seconds of the class at `sample_rate`, normalised to
/// [`SIGNAL_RMS`]. Identical seeds give bit-identical output.
pub fn synth_class_signal(class: SoundClass, duration: f64, sample_rate: f64, seed: u64) -> Vec<f64> {
    let n = (duration * sample_rate).round() as usize;
    let mut rng = seed::rng(seed, &[seed::tag(class.name())]);
    let mut x = match class {
        SoundClass::Speech => speech(n, sample_rate, &mut rng),
        SoundClass::Siren => siren(n, sample_rate, &mut rng),
        SoundClass::DogBark => dog_bark(n, sample_rate, &mut rng),
        SoundClass::Engine => engine(n, sample_rate, &mut rng),
        SoundClass::Piano => piano(n, sample_rate, &mut rng),
    };
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= SIGNAL_RMS / rms);
    }
    x
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Two-pole resonator with unit peak gain.
#[derive(Clone, Copy, Default)]
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, fs: f64) -> Self {
        let mut r = Self::default();
        r.tune(freq, bandwidth, fs);
        r
    }

    fn tune(&mut self, freq: f64, bandwidth: f64, fs: f64) {
        let radius = (-PI * bandwidth / fs).exp();
        self.a1 = 2.0 * radius * (TAU * freq / fs).cos();
        self.a2 = -radius * radius;
        self.gain = 1.0 - radius;
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.y1 + self.a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

struct OnePole {
    a: f64,
    y: f64,
}

impl OnePole {
    fn lowpass(cutoff: f64, fs: f64) -> Self {
        Self {
            a: (-TAU * cutoff / fs).exp(),
            y: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        self.y = (1.0 - self.a) * x + self.a * self.y;
        self.y
    }
}

const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [660.0, 1720.0, 2410.0],
    [490.0, 1350.0, 1690.0],
];

/// Glottal pulse train through three gliding formants. Syllables are
/// grouped into words separated by short breathy pauses; pitch declines over
/// each syllable.
fn speech(n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f0_base = rng.gen_range(95.0..210.0);
    let vibrato_rate = rng.gen_range(0.5..1.2);
    let vibrato_phase = rng.gen_range(0.0..TAU);
    let mut formants = VOWELS[rng.gen_range(0..VOWELS.len())];
    let mut target = formants;
    let bandwidths = [80.0, 100.0, 130.0];
    let mut res: Vec<Resonator> = (0..3).map(|i| Resonator::new(formants[i], bandwidths[i], fs)).collect();
    let glide = (-1.0 / (0.03 * fs)).exp();
    let mut glottis = OnePole::lowpass(800.0, fs);
    let mut breath = Resonator::new(1500.0, 2000.0, fs);

    let mut phase = 0.0;
    let mut syllable_left = 0usize;
    let mut syllable_len = 1usize;
    let mut syllables_left_in_word = 0usize;
    let mut pause_left = 0usize;
    let mut jitter = 0.0;
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        if pause_left > 0 {
            pause_left -= 1;
            out.push(0.002 * breath.tick(gauss(rng)));
            continue;
        }
        if syllable_left == 0 {
            if syllables_left_in_word == 0 {
                syllables_left_in_word = rng.gen_range(2..=4);
                if t > 0 {
                    pause_left = (rng.gen_range(0.06..0.2) * fs) as usize;
                }
            }
            syllables_left_in_word -= 1;
            syllable_len = (rng.gen_range(0.16..0.3) * fs) as usize;
            syllable_left = syllable_len;
            target = VOWELS[rng.gen_range(0..VOWELS.len())];
            jitter = 0.03 * gauss(rng);
            if pause_left > 0 {
                out.push(0.002 * breath.tick(gauss(rng)));
                continue;
            }
        }
        let s = 1.0 - syllable_left as f64 / syllable_len as f64;
        syllable_left -= 1;
        let time = t as f64 / fs;
        let f0 = f0_base * (1.0 + 0.08 * (TAU * vibrato_rate * time + vibrato_phase).sin() + jitter) * (1.0 - 0.05 * s);
        phase += f0 / fs;
        let pulse = if phase >= 1.0 {
            phase -= 1.0;
            1.0
        } else {
            0.0
        };
        let excitation = glottis.tick(pulse) + 0.02 * gauss(rng);
        if t % 32 == 0 {
            for i in 0..3 {
                formants[i] = glide.powi(32) * formants[i] + (1.0 - glide.powi(32)) * target[i];
                res[i].tune(formants[i], bandwidths[i], fs);
            }
        }
        let voiced = res[0].tick(excitation) + 0.6 * res[1].tick(excitation) + 0.3 * res[2].tick(excitation);
        let envelope = 0.15 + 0.85 * (PI * s).sin().powi(2);
        out.push(envelope * voiced);
    }
    out
}

/// Sweep endpoints and period (Hz, Hz, s) of the siren generated from `seed`.
pub fn siren_sweep(seed: u64) -> (f64, f64, f64) {
    let mut rng = seed::rng(seed, &[seed::tag(SoundClass::Siren.name())]);
    siren_params(&mut rng)
}

fn siren_params(rng: &mut ChaCha8Rng) -> (f64, f64, f64) {
    (
        rng.gen_range(500.0..750.0),
        rng.gen_range(1200.0..1700.0),
        rng.gen_range(0.8..1.6),
    )
}

/// Tone whose frequency sweeps sinusoidally between two endpoints.
fn siren(n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi, period) = siren_params(rng);
    let start = rng.gen_range(0.0..TAU);
    let mut phase = 0.0;
    (0..n)
        .map(|t| {
            let time = t as f64 / fs;
            let f = 0.5 * (lo + hi) + 0.5 * (hi - lo) * (TAU * time / period + start).sin();
            phase = (phase + TAU * f / fs) % TAU;
            phase.sin() + 0.25 * (2.0 * phase).sin() + 0.08 * (3.0 * phase).sin()
        })
        .collect()
}

/// Harmonic, noisy bursts with a sharp attack over a faint band-limited
/// noise floor.
fn dog_bark(n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut band = Resonator::new(1200.0, 1500.0, fs);
    let mut floor_band = Resonator::new(900.0, 1200.0, fs);
    let mut out: Vec<f64> = (0..n).map(|_| 0.005 * floor_band.tick(gauss(rng))).collect();
    let mut start = (rng.gen_range(0.0..0.1) * fs) as usize;
    while start < n {
        let len = (rng.gen_range(0.12..0.25) * fs) as usize;
        let pitch = rng.gen_range(350.0..650.0);
        let decay = rng.gen_range(0.03..0.07);
        let amp = rng.gen_range(0.7..1.0);
        let mut phase = 0.0;
        for i in 0..len.min(n - start) {
            let time = i as f64 / fs;
            let env = (1.0 - (-time / 0.008).exp()) * (-time / decay).exp();
            let f = pitch * (1.0 - 0.25 * time / 0.25);
            phase = (phase + TAU * f / fs) % TAU;
            let harmonic: f64 = (1..=6).map(|k| (k as f64 * phase).sin() / k as f64).sum();
            out[start + i] += amp * env * (0.6 * harmonic + 4.0 * band.tick(gauss(rng)));
        }
        start += len + (rng.gen_range(0.12..0.4) * fs) as usize;
    }
    out
}

/// Low harmonic stack at the firing rate plus rumble.
fn engine(n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f0 = rng.gen_range(28.0..45.0);
    let wobble_rate = rng.gen_range(0.2..0.6);
    let harmonics: Vec<(f64, f64)> = (1..=15)
        .filter(|&k| k as f64 * f0 * 1.05 < 450.0)
        .map(|k| (k as f64, rng.gen_range(0.5..1.0) / (k as f64).sqrt()))
        .collect();
    let phases: Vec<f64> = harmonics.iter().map(|_| rng.gen_range(0.0..TAU)).collect();
    let mut lp1 = OnePole::lowpass(150.0, fs);
    let mut lp2 = OnePole::lowpass(150.0, fs);
    let mut phase = 0.0;
    (0..n)
        .map(|t| {
            let time = t as f64 / fs;
            let f = f0 * (1.0 + 0.03 * (TAU * wobble_rate * time).sin());
            phase = (phase + TAU * f / fs) % TAU;
            let tonal: f64 = harmonics
                .iter()
                .zip(&phases)
                .map(|(&(k, a), p)| a * (k * phase + p).sin())
                .sum();
            let rumble = lp2.tick(lp1.tick(gauss(rng)));
            tonal * (1.0 + 0.3 * phase.cos()) + 8.0 * rumble
        })
        .collect()
}

/// Overlapping struck-string notes with slightly stretched partials.
fn piano(n: usize, fs: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let inharmonicity = 1e-4;
    let mut onset = 0usize;
    while onset < n {
        let midi = rng.gen_range(48..=84) as f64;
        let f0 = 440.0 * 2f64.powf((midi - 69.0) / 12.0);
        let tau0 = rng.gen_range(0.3..0.7);
        let velocity = rng.gen_range(0.6..1.0);
        for p in 1..=8 {
            let pf = p as f64;
            let freq = pf * f0 * (1.0 + inharmonicity * pf * pf).sqrt();
            if freq > 0.45 * fs {
                break;
            }
            let amp = velocity / pf.powf(1.2);
            let tau = tau0 / pf.powf(0.7);
            let w = TAU * freq / fs;
            let phase0 = rng.gen_range(0.0..TAU);
            for (i, o) in out[onset..].iter_mut().enumerate() {
                let time = i as f64 / fs;
                let env = (1.0 - (-time / 0.003).exp()) * (-time / tau).exp();
                if env < 1e-4 && time > 0.01 {
                    break;
                }
                *o += amp * env * (w * i as f64 + phase0).sin();
            }
        }
        onset += (rng.gen_range(0.25..0.6) * fs) as usize;
    }
    out
}
