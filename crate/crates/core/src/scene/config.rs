//! Declarative scene description.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::angle::rad;
use crate::error::{CassError, Result};
use crate::io;
use crate::seed;

use super::listener::{ListenerState, Policy};
use super::sources::{synth_class_signal, SoundClass};

/// Source positions, degrees.
pub const SOURCE_SLOTS: [f64; 4] = [30.0, 70.0, 110.0, 150.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Class label; a built-in class name unless `file` is given.
    pub class: String,
    /// Degrees.
    pub azimuth: f64,
    /// Generator seed for built-in classes.
    #[serde(default)]
    pub seed: u64,
    /// WAV file to play instead of a generated signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Start offset into `file`, seconds.
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub sources: Vec<SourceSpec>,
    /// Seconds; a whole number of blocks.
    pub duration: f64,
    /// Degrees.
    pub initial_look: f64,
    /// Degrees, `[low, high]`.
    pub look_limits: [f64; 2],
    pub policy: Policy,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            sources: Vec::new(),
            duration: 3.0,
            initial_look: 90.0,
            look_limits: [10.0, 170.0],
            policy: Policy::None,
            alpha: 5.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    /// Reads a TOML scene description.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CassError::io(path, e))?;
        let cfg: Self = toml::from_str(&text)?;
        Ok(cfg)
    }

    /// Scene with `num_sources` sources on distinct slots playing distinct
    /// classes, all drawn from `seed`.
    pub fn random(num_sources: usize, classes: &[String], policy: Policy, alpha: f64, seed: u64) -> Result<Self> {
        if num_sources == 0 || num_sources > SOURCE_SLOTS.len() {
            return Err(CassError::Config(format!(
                "a scene holds 1 to {} sources, got {num_sources}",
                SOURCE_SLOTS.len()
            )));
        }
        if classes.len() < num_sources {
            return Err(CassError::Config(format!(
                "{num_sources} sources need as many distinct classes, only {} available",
                classes.len()
            )));
        }
        let mut rng = seed::rng(seed, &[seed::tag("layout")]);
        let mut slots = SOURCE_SLOTS.to_vec();
        slots.shuffle(&mut rng);
        let mut picked: Vec<&String> = classes.iter().collect();
        picked.shuffle(&mut rng);
        let mut sources: Vec<SourceSpec> = (0..num_sources)
            .map(|i| SourceSpec {
                class: picked[i].clone(),
                azimuth: slots[i],
                seed: seed::derive(seed, &[seed::tag("source"), i as u64]),
                file: None,
                offset: 0.0,
            })
            .collect();
        sources.sort_by(|a, b| a.azimuth.total_cmp(&b.azimuth));
        Ok(Self {
            sources,
            policy,
            alpha,
            seed,
            ..Self::default()
        })
    }

    pub fn validate(&self, block_duration: f64) -> Result<()> {
        if self.sources.is_empty() {
            return Err(CassError::Config("scene has no sources".into()));
        }
        for (i, a) in self.sources.iter().enumerate() {
            if !a.azimuth.is_finite() {
                return Err(CassError::Config(format!("source {i} has a non-finite azimuth")));
            }
            for b in &self.sources[i + 1..] {
                if crate::angle::circular_distance(rad(a.azimuth), rad(b.azimuth)) < 1e-9 {
                    return Err(CassError::Config(format!("two sources share azimuth {}", a.azimuth)));
                }
            }
        }
        let blocks = self.duration / block_duration;
        if !(blocks >= 1.0) || (blocks - blocks.round()).abs() > 1e-6 {
            return Err(CassError::Config(format!(
                "duration {} s is not a whole number of {block_duration} s blocks",
                self.duration
            )));
        }
        let [lo, hi] = self.look_limits;
        if !(lo <= self.initial_look && self.initial_look <= hi) {
            return Err(CassError::Config(format!(
                "initial look direction {} lies outside [{lo}, {hi}]",
                self.initial_look
            )));
        }
        if !self.alpha.is_finite() {
            return Err(CassError::Config("alpha must be finite".into()));
        }
        Ok(())
    }

    pub fn num_blocks(&self, block_duration: f64) -> usize {
        (self.duration / block_duration).round() as usize
    }

    pub fn listener(&self) -> ListenerState {
        ListenerState {
            psi: rad(self.initial_look),
            policy: self.policy,
            alpha: self.alpha,
            limits: (rad(self.look_limits[0]), rad(self.look_limits[1])),
        }
    }

    pub fn azimuths(&self) -> Vec<f64> {
        self.sources
            .iter()
            .map(|s| crate::angle::wrap(rad(s.azimuth)))
            .collect()
    }

    /// Dry source signals of `pre + duration·fs + post` samples; the scene
    /// proper starts at sample `pre`.
    pub fn source_signals(&self, sample_rate: f64, pre: usize, post: usize) -> Result<Vec<Vec<f64>>> {
        let body = (self.duration * sample_rate).round() as usize;
        let total = pre + body + post;
        self.sources
            .iter()
            .map(|s| match &s.file {
                Some(path) => {
                    let wav = io::read_wav(path)?;
                    if (wav.sample_rate - sample_rate).abs() > 1e-9 {
                        return Err(CassError::Config(format!(
                            "{} is sampled at {} Hz, the scene runs at {sample_rate} Hz",
                            path.display(),
                            wav.sample_rate
                        )));
                    }
                    let mono = wav.mono();
                    if mono.is_empty() {
                        return Err(CassError::EmptyInput("source WAV file"));
                    }
                    let start = (s.offset * sample_rate).round() as usize;
                    // loop short recordings
                    Ok((0..total).map(|i| mono[(start + i) % mono.len()]).collect())
                }
                None => {
                    let class: SoundClass = s.class.parse()?;
                    Ok(synth_class_signal(
                        class,
                        total as f64 / sample_rate,
                        sample_rate,
                        s.seed,
                    ))
                }
            })
            .collect()
    }
}
