//! Sound pools and fold splits.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::rad;
use crate::classifier::{train_source_models, training_frames, ClassifierConfig, LabeledFrames, SourceModels};
use crate::error::{CassError, Result};
use crate::frontend::AuditoryFrontend;
use crate::io;
use crate::scene::config::SourceSpec;
use crate::scene::renderer::BinauralRenderer;
use crate::scene::sources::{synth_class_signal, SoundClass};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSetConfig {
    /// Generated recordings per class and fold.
    pub items_per_fold: usize,
    /// Seconds per generated recording.
    pub item_duration: f64,
    /// Head-relative directions the training recordings are rendered from,
    /// degrees; recording `i` uses entry `i mod len`.
    pub directions: Vec<f64>,
    /// Frames quieter than this fraction of a recording's loudest frame
    /// count as silence.
    pub silence_ratio: f64,
}

impl Default for TrainingSetConfig {
    fn default() -> Self {
        Self {
            items_per_fold: 1,
            item_duration: 3.0,
            // every relative direction a slot can take within the look limits
            directions: vec![-140.0, -100.0, -60.0, -20.0, 20.0, 60.0, 100.0, 140.0],
            silence_ratio: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SoundPool {
    /// Built-in generators; folds differ by generator seed.
    Synthetic { classes: Vec<SoundClass>, seed: u64 },
    /// Class-named subdirectories of WAV files; file `i` of a class belongs
    /// to fold `i mod folds`.
    Directory { classes: Vec<(String, Vec<PathBuf>)> },
}

impl SoundPool {
    pub fn synthetic(seed: u64) -> Self {
        SoundPool::Synthetic {
            classes: SoundClass::ALL.to_vec(),
            seed,
        }
    }

    pub fn from_dir(root: &Path) -> Result<Self> {
        let read = |dir: &Path| -> Result<Vec<PathBuf>> {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| CassError::io(dir, e))?
                .map(|e| e.map(|e| e.path()).map_err(|e| CassError::io(dir, e)))
                .collect::<Result<_>>()?;
            entries.sort();
            Ok(entries)
        };
        let mut classes = Vec::new();
        for dir in read(root)?.into_iter().filter(|p| p.is_dir()) {
            let files: Vec<PathBuf> = read(&dir)?
                .into_iter()
                .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
                .collect();
            if !files.is_empty() {
                let label = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
                classes.push((label, files));
            }
        }
        if classes.is_empty() {
            return Err(CassError::Config(format!(
                "{} has no class subdirectories containing WAV files",
                root.display()
            )));
        }
        Ok(SoundPool::Directory { classes })
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            SoundPool::Synthetic { classes, .. } => classes.iter().map(|c| c.name().to_string()).collect(),
            SoundPool::Directory { classes } => classes.iter().map(|(l, _)| l.clone()).collect(),
        }
    }

    /// Training recordings of class `class`: every fold except `test_fold`
    /// (all folds when `None`).
    pub fn training_signals(
        &self,
        class: usize,
        test_fold: Option<usize>,
        folds: usize,
        cfg: &TrainingSetConfig,
        sample_rate: f64,
    ) -> Result<Vec<Vec<f64>>> {
        let keep = |f: usize| test_fold != Some(f);
        match self {
            SoundPool::Synthetic { classes, seed } => Ok((0..folds)
                .filter(|&f| keep(f))
                .flat_map(|f| (0..cfg.items_per_fold).map(move |i| (f, i)))
                .map(|(f, i)| {
                    let s = seed::derive(*seed, &[seed::tag("train"), class as u64, f as u64, i as u64]);
                    synth_class_signal(classes[class], cfg.item_duration, sample_rate, s)
                })
                .collect()),
            SoundPool::Directory { classes } => classes[class]
                .1
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(i % folds))
                .map(|(_, path)| {
                    let wav = io::read_wav(path)?;
                    if (wav.sample_rate - sample_rate).abs() > 1e-9 {
                        return Err(CassError::Config(format!(
                            "{} is sampled at {} Hz, expected {sample_rate} Hz",
                            path.display(),
                            wav.sample_rate
                        )));
                    }
                    Ok(wav.mono())
                })
                .collect(),
        }
    }

    /// Scene source of class `class` at `azimuth` degrees drawn from the
    /// test split of `fold`.
    pub fn scene_source(
        &self,
        class: usize,
        fold: usize,
        folds: usize,
        azimuth: f64,
        scene_seed: u64,
    ) -> Result<SourceSpec> {
        match self {
            SoundPool::Synthetic { classes, seed } => Ok(SourceSpec {
                class: classes[class].name().to_string(),
                azimuth,
                seed: seed::derive(*seed, &[seed::tag("test"), class as u64, fold as u64, scene_seed]),
                file: None,
                offset: 0.0,
            }),
            SoundPool::Directory { classes } => {
                let (label, files) = &classes[class];
                let candidates: Vec<&PathBuf> = files
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % folds == fold)
                    .map(|(_, p)| p)
                    .collect();
                if candidates.is_empty() {
                    return Err(CassError::Config(format!(
                        "class `{label}` has no recordings in fold {fold}"
                    )));
                }
                let mut rng = seed::rng(scene_seed, &[seed::tag(label)]);
                let file = candidates[rng.gen_range(0..candidates.len())].clone();
                Ok(SourceSpec {
                    class: label.clone(),
                    azimuth,
                    seed: 0,
                    file: Some(file),
                    offset: 0.0,
                })
            }
        }
    }
}

/// Renders each training recording from one of the configured directions
/// (cycling through them) and collects the non-silent frames' spectral
/// attributes.
pub fn class_training_frames(
    signals: &[Vec<f64>],
    frontend: &AuditoryFrontend,
    renderer: &dyn BinauralRenderer,
    cfg: &TrainingSetConfig,
) -> Result<Vec<crate::frontend::SpectralFeatureVector>> {
    if cfg.directions.is_empty() {
        return Err(CassError::Config(
            "training needs at least one rendering direction".into(),
        ));
    }
    let per_signal: Vec<Result<Vec<_>>> = signals
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let (l, r) = renderer.render(x, rad(cfg.directions[i % cfg.directions.len()]));
            let frames = frontend.frame_count(x.len());
            let block = frontend.analyze_monaural(&l, &r, 0, frames)?;
            Ok(training_frames(&block, cfg.silence_ratio))
        })
        .collect();
    let mut out = Vec::new();
    for frames in per_signal {
        out.extend(frames?);
    }
    Ok(out)
}

/// Trains source models for every class of the pool, holding out
/// `test_fold` when given.
pub fn train_pool_models(
    pool: &SoundPool,
    test_fold: Option<usize>,
    folds: usize,
    frontend: &AuditoryFrontend,
    renderer: &dyn BinauralRenderer,
    training: &TrainingSetConfig,
    classifier: &ClassifierConfig,
) -> Result<SourceModels> {
    let sample_rate = frontend.config().sample_rate;
    let labeled = pool
        .labels()
        .into_iter()
        .enumerate()
        .map(|(c, label)| {
            let signals = pool.training_signals(c, test_fold, folds, training, sample_rate)?;
            let frames = class_training_frames(&signals, frontend, renderer, training)?;
            Ok(LabeledFrames { label, frames })
        })
        .collect::<Result<Vec<_>>>()?;
    train_source_models(&labeled, classifier)
}
