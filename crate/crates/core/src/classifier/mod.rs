//! Per-class GMM source models over spectral attribute vectors, and
//! block-level classification of segregated streams.

pub mod gmm;

use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gmm::{fit_gmm, Gmm, GmmConfig, GmmFit};

use crate::clustering::SoftMaskSet;
use crate::error::{CassError, Result};
use crate::frontend::spectral::NUM_SPECTRAL_FEATURES;
use crate::frontend::{spectral_features, AuditoryBlock, SpectralFeatureVector};
use crate::io;
use crate::localization::argmax_lowest;
use crate::seed;

pub const MODELS_FORMAT_VERSION: u32 = 1;

/// Per-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn fit(rows: &[[f64; NUM_SPECTRAL_FEATURES]]) -> Self {
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..NUM_SPECTRAL_FEATURES)
            .map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / n)
            .collect();
        let std = (0..NUM_SPECTRAL_FEATURES)
            .map(|d| {
                let var = rows.iter().map(|r| (r[d] - mean[d]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &SpectralFeatureVector) -> DVector<f64> {
        let a = x.to_array();
        DVector::from_iterator(
            NUM_SPECTRAL_FEATURES,
            (0..NUM_SPECTRAL_FEATURES).map(|d| (a[d] - self.mean[d]) / self.std[d]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub gmm: GmmConfig,
    /// A class needs at least `components · 7 · this` training frames.
    pub min_frames_per_parameter: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            gmm: GmmConfig::default(),
            min_frames_per_parameter: 10,
            seed: 0xc1a55,
        }
    }
}

impl ClassifierConfig {
    pub fn min_frames(&self) -> usize {
        self.gmm.components * NUM_SPECTRAL_FEATURES * self.min_frames_per_parameter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub label: String,
    pub gmm: Gmm,
}

/// Trained source models sharing one feature normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModels {
    pub version: u32,
    pub normalization: Normalization,
    pub models: Vec<SourceModel>,
    pub config_hash: String,
}

/// Training frames of one class; silent frames must already be removed.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrames {
    pub label: String,
    pub frames: Vec<SpectralFeatureVector>,
}

impl SourceModels {
    pub fn labels(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.label.as_str()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.models.iter().position(|m| m.label == label)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let models: Self = io::read_json(path, "source models (run `train-clf` first)")?;
        if models.version != MODELS_FORMAT_VERSION {
            return Err(CassError::Config(format!(
                "source model format {} is not supported (expected {})",
                models.version, MODELS_FORMAT_VERSION
            )));
        }
        Ok(models)
    }
}

/// Fits one GMM per class on standardised features. The standardisation is
/// pooled over all classes so that class likelihoods stay comparable.
pub fn train_source_models(classes: &[LabeledFrames], cfg: &ClassifierConfig) -> Result<SourceModels> {
    if classes.is_empty() {
        return Err(CassError::Training("no classes to train".into()));
    }
    for c in classes {
        if c.frames.len() < cfg.min_frames() {
            return Err(CassError::ClassifierTraining {
                class: c.label.clone(),
                reason: format!("{} frames, need at least {}", c.frames.len(), cfg.min_frames()),
            });
        }
    }
    let pooled: Vec<[f64; NUM_SPECTRAL_FEATURES]> = classes
        .iter()
        .flat_map(|c| c.frames.iter().map(|f| f.to_array()))
        .collect();
    let normalization = Normalization::fit(&pooled);
    let models = classes
        .par_iter()
        .map(|c| {
            let data: Vec<DVector<f64>> = c.frames.iter().map(|f| normalization.apply(f)).collect();
            let fit = fit_gmm(&data, &cfg.gmm, seed::derive(cfg.seed, &[seed::tag(&c.label)])).map_err(|e| {
                CassError::ClassifierTraining {
                    class: c.label.clone(),
                    reason: e.to_string(),
                }
            })?;
            Ok(SourceModel {
                label: c.label.clone(),
                gmm: fit.gmm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<&str> = classes.iter().map(|c| c.label.as_str()).collect();
    Ok(SourceModels {
        version: MODELS_FORMAT_VERSION,
        normalization,
        models,
        config_hash: io::config_hash(&(cfg, labels)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassPosterior {
    pub probabilities: Vec<f64>,
    /// No class likelihood was finite; the posterior is uniform.
    pub underflow: bool,
}

/// Posterior over classes for one frame under a uniform class prior.
pub fn frame_posterior(x: &SpectralFeatureVector, models: &SourceModels) -> ClassPosterior {
    let z = models.normalization.apply(x);
    let lls: Vec<f64> = models.models.iter().map(|m| m.gmm.ln_pdf(&z)).collect();
    let s = lls.len();
    let peak = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return ClassPosterior {
            probabilities: vec![1.0 / s as f64; s],
            underflow: true,
        };
    }
    let mut p: Vec<f64> = lls.iter().map(|v| (v - peak).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    ClassPosterior {
        probabilities: p,
        underflow: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDecision {
    /// Winning class index, `None` when every frame was skipped.
    pub class: Option<usize>,
    /// Frame-averaged posterior (empty without a decision).
    pub posterior: Vec<f64>,
    pub frames_used: usize,
}

/// Averages frame posteriors over the non-skipped frames (`None`) and picks
/// the most probable class; ties go to the lowest class index.
pub fn classify_block(frames: &[Option<SpectralFeatureVector>], models: &SourceModels) -> BlockDecision {
    let posteriors: Vec<Vec<f64>> = frames
        .iter()
        .flatten()
        .map(|x| frame_posterior(x, models).probabilities)
        .collect();
    average_decision(&posteriors)
}

/// Decision from precomputed frame posteriors.
pub fn average_decision(posteriors: &[Vec<f64>]) -> BlockDecision {
    let Some(first) = posteriors.first() else {
        return BlockDecision {
            class: None,
            posterior: Vec::new(),
            frames_used: 0,
        };
    };
    let mut avg = vec![0.0; first.len()];
    for p in posteriors {
        for (a, v) in avg.iter_mut().zip(p) {
            *a += v;
        }
    }
    let k = posteriors.len() as f64;
    avg.iter_mut().for_each(|a| *a /= k);
    BlockDecision {
        class: Some(argmax_lowest(&avg).0),
        posterior: avg,
        frames_used: posteriors.len(),
    }
}

/// Spectral attributes of each frame of stream `c`, computed from the
/// ratemap weighted by the stream's soft mask. All-zero masked frames are
/// `None`.
pub fn stream_features(block: &AuditoryBlock, masks: &SoftMaskSet, c: usize) -> Vec<Option<SpectralFeatureVector>> {
    let l = block.channels;
    let mut masked = vec![0.0; l];
    (0..block.frames)
        .map(|k| {
            for (ch, m) in masked.iter_mut().enumerate() {
                *m = block.ratemap(k, ch) * masks.get(k, ch, c);
            }
            spectral_features(&masked, &block.center_freqs)
        })
        .collect()
}

/// Spectral attributes of every frame whose ratemap energy exceeds
/// `silence_ratio` times the loudest frame's; quieter frames are dropped.
pub fn training_frames(block: &AuditoryBlock, silence_ratio: f64) -> Vec<SpectralFeatureVector> {
    let energies: Vec<f64> = (0..block.frames).map(|k| block.ratemap_frame(k).iter().sum()).collect();
    let loudest = energies.iter().cloned().fold(0.0, f64::max);
    (0..block.frames)
        .filter(|&k| energies[k] > silence_ratio * loudest)
        .filter_map(|k| spectral_features(block.ratemap_frame(k), &block.center_freqs))
        .collect()
}
