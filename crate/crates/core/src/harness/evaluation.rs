//! Cross-validated evaluation over scenarios and head-rotation policies.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierConfig;
use crate::clustering::EmConfig;
use crate::error::{CassError, Result};
use crate::frontend::AuditoryFrontend;
use crate::io;
use crate::localization::GaussianAzimuthBank;
use crate::scene::config::SceneConfig;
use crate::scene::listener::Policy;
use crate::scene::renderer::BinauralRenderer;
use crate::scene::run::{run_scene, SceneContext, SceneOutcome};
use crate::scene::sources::SoundClass;
use crate::seed;

use super::metrics::{classification_error_rate, Decision};
use super::pool::{train_pool_models, SoundPool, TrainingSetConfig};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub folds: usize,
    pub scenes_per_fold: usize,
    /// Folds actually run; all of them when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluated_folds: Option<Vec<usize>>,
    /// Number of simultaneous sources, one scenario each.
    pub scenarios: Vec<usize>,
    pub policies: Vec<Policy>,
    pub alpha: f64,
    pub master_seed: u64,
    /// Seconds per scene.
    pub scene_duration: f64,
    /// Directory of class-named subdirectories with WAV files; the built-in
    /// synthetic classes are used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sound_dir: Option<PathBuf>,
    /// Subset of the built-in classes; all of them when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<SoundClass>>,
    pub training: TrainingSetConfig,
    pub classifier: ClassifierConfig,
    pub em: EmConfig,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            scenes_per_fold: 30,
            evaluated_folds: None,
            scenarios: vec![2, 3, 4],
            policies: Policy::ALL.to_vec(),
            alpha: 5.0,
            master_seed: 0,
            scene_duration: 3.0,
            sound_dir: None,
            classes: None,
            training: TrainingSetConfig::default(),
            classifier: ClassifierConfig::default(),
            em: EmConfig::default(),
        }
    }
}

impl EvaluationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CassError::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    pub fn folds_to_run(&self) -> Vec<usize> {
        self.evaluated_folds
            .clone()
            .unwrap_or_else(|| (0..self.folds).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds == 0 || self.scenes_per_fold == 0 {
            return Err(CassError::Config("folds and scenes per fold must be positive".into()));
        }
        if let Some(f) = self.folds_to_run().iter().find(|&&f| f >= self.folds) {
            return Err(CassError::Config(format!(
                "fold {f} out of range for {} folds",
                self.folds
            )));
        }
        if self.scenarios.is_empty() || self.policies.is_empty() {
            return Err(CassError::Config("need at least one scenario and one policy".into()));
        }
        Ok(())
    }

    /// The sound pool the configuration refers to.
    pub fn pool(&self) -> Result<SoundPool> {
        let seed = seed::derive(self.master_seed, &[seed::tag("pool")]);
        match (&self.sound_dir, &self.classes) {
            (Some(_), Some(_)) => Err(CassError::Config(
                "`classes` only applies to the built-in sounds, not `sound_dir`".into(),
            )),
            (Some(dir), None) => SoundPool::from_dir(dir),
            (None, Some(classes)) => Ok(SoundPool::Synthetic {
                classes: classes.clone(),
                seed,
            }),
            (None, None) => Ok(SoundPool::synthetic(seed)),
        }
    }

    /// Seed of scene `index` of `sources`-source scenario in `fold`; shared by
    /// all policies so they face identical scenes.
    pub fn scene_seed(&self, fold: usize, sources: usize, index: usize) -> u64 {
        seed::derive(
            self.master_seed,
            &[seed::tag("scene"), fold as u64, sources as u64, index as u64],
        )
    }

    pub fn classifier_seed(&self, fold: usize) -> u64 {
        seed::derive(self.classifier.seed, &[fold as u64])
    }
}

/// Scores of one scenario × policy cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub sources: usize,
    pub policy: Policy,
    pub scenes: usize,
    /// Mean over scenes of each scene's cumulative RMSE, degrees.
    pub mean_rmse: Option<f64>,
    /// RMSE over every matched block and source of the cell, degrees.
    pub pooled_rmse: Option<f64>,
    /// Percent; skipped blocks count as errors.
    pub classification_error: Option<f64>,
    pub decisions: usize,
    pub skipped_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub classifier_seed: u64,
    /// `scene_seeds[s][i]`: seed of scene `i` of scenario `s`.
    pub scene_seeds: Vec<Vec<u64>>,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: u32,
    pub config: EvaluationConfig,
    pub config_hash: String,
    pub bank_config_hash: String,
    pub master_seed: u64,
    pub folds: Vec<FoldReport>,
    /// Cells pooled over every evaluated fold.
    pub summary: Vec<CellSummary>,
}

impl EvaluationReport {
    pub fn cell(&self, sources: usize, policy: Policy) -> Option<&CellSummary> {
        self.summary.iter().find(|c| c.sources == sources && c.policy == policy)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    /// Summary table: one row per scenario and head-rotation policy.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "scenario,sources,head_rotation,localization_error_deg,classification_error_pct"
        )?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        for cell in &self.summary {
            let scenario = self
                .config
                .scenarios
                .iter()
                .position(|&n| n == cell.sources)
                .map_or(0, |i| i + 1);
            writeln!(
                out,
                "{scenario},{},{},{},{}",
                cell.sources,
                cell.policy,
                fmt(cell.mean_rmse),
                fmt(cell.classification_error)
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| CassError::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| CassError::io(path, e))
    }
}

/// Per-scene ingredients the aggregation needs.
struct SceneScore {
    rmse: Option<f64>,
    squared_errors: Vec<f64>,
    decisions: Vec<Decision>,
    skipped: usize,
}

impl From<&SceneOutcome> for SceneScore {
    fn from(o: &SceneOutcome) -> Self {
        Self {
            rmse: o.rmse,
            squared_errors: o
                .blocks
                .iter()
                .flat_map(|b| b.sources.iter().filter_map(|s| s.error.map(|e| e * e)))
                .collect(),
            decisions: o.decisions.clone(),
            skipped: o.blocks.iter().filter(|b| b.skipped).count(),
        }
    }
}

fn summarize(sources: usize, policy: Policy, scores: &[&SceneScore]) -> CellSummary {
    let rmses: Vec<f64> = scores.iter().filter_map(|s| s.rmse).collect();
    let sq: Vec<f64> = scores.iter().flat_map(|s| s.squared_errors.iter().copied()).collect();
    let decisions: Vec<Decision> = scores.iter().flat_map(|s| s.decisions.iter().copied()).collect();
    CellSummary {
        sources,
        policy,
        scenes: scores.len(),
        mean_rmse: (!rmses.is_empty()).then(|| rmses.iter().sum::<f64>() / rmses.len() as f64),
        pooled_rmse: (!sq.is_empty()).then(|| (sq.iter().sum::<f64>() / sq.len() as f64).sqrt()),
        classification_error: classification_error_rate(&decisions).ok(),
        decisions: decisions.len(),
        skipped_blocks: scores.iter().map(|s| s.skipped).sum(),
    }
}

/// Runs the cross-validation protocol: per fold, train source models on the
/// other folds and simulate `scenes_per_fold` scenes per scenario, each under
/// every policy.
pub fn run_evaluation(
    cfg: &EvaluationConfig,
    frontend: &AuditoryFrontend,
    renderer: &dyn BinauralRenderer,
    bank: &GaussianAzimuthBank,
    mut progress: impl FnMut(&str),
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let pool = cfg.pool()?;
    let labels = pool.labels();
    let mut folds = Vec::new();
    // per cell, the scores of every evaluated fold
    let mut all: Vec<Vec<SceneScore>> = Vec::new();

    for fold in cfg.folds_to_run() {
        progress(&format!("fold {fold}: training source models"));
        let classifier = ClassifierConfig {
            seed: cfg.classifier_seed(fold),
            ..cfg.classifier.clone()
        };
        let models = train_pool_models(
            &pool,
            Some(fold),
            cfg.folds,
            frontend,
            renderer,
            &cfg.training,
            &classifier,
        )?;
        let ctx = SceneContext {
            frontend,
            renderer,
            bank,
            models: &models,
            em: &cfg.em,
        };

        let mut scene_seeds = Vec::new();
        let mut jobs = Vec::new();
        for &n in &cfg.scenarios {
            let seeds: Vec<u64> = (0..cfg.scenes_per_fold).map(|i| cfg.scene_seed(fold, n, i)).collect();
            for &s in &seeds {
                let mut scene = SceneConfig::random(n, &labels, Policy::None, cfg.alpha, s)?;
                scene.duration = cfg.scene_duration;
                for src in &mut scene.sources {
                    let class = labels.iter().position(|l| *l == src.class).expect("label from pool");
                    *src = pool.scene_source(class, fold, cfg.folds, src.azimuth, s)?;
                }
                for &policy in &cfg.policies {
                    jobs.push(SceneConfig {
                        policy,
                        ..scene.clone()
                    });
                }
            }
            scene_seeds.push(seeds);
        }
        progress(&format!("fold {fold}: simulating {} scenes", jobs.len()));
        let outcomes: Vec<Result<SceneScore>> = jobs
            .par_iter()
            .map(|scene| run_scene(scene, &ctx, false).map(|o| SceneScore::from(&o)))
            .collect();
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

        // jobs are ordered scenario, scene, policy
        let p = cfg.policies.len();
        let mut cells = Vec::new();
        let mut fold_scores: Vec<Vec<SceneScore>> = Vec::new();
        let mut iter = outcomes.into_iter();
        for _ in &cfg.scenarios {
            let mut per_policy: Vec<Vec<SceneScore>> = (0..p).map(|_| Vec::new()).collect();
            for _ in 0..cfg.scenes_per_fold {
                for bucket in per_policy.iter_mut() {
                    bucket.push(iter.next().expect("one outcome per job"));
                }
            }
            fold_scores.extend(per_policy);
        }
        for (s, &n) in cfg.scenarios.iter().enumerate() {
            for (q, &policy) in cfg.policies.iter().enumerate() {
                let scores: Vec<&SceneScore> = fold_scores[s * p + q].iter().collect();
                cells.push(summarize(n, policy, &scores));
            }
        }
        if all.is_empty() {
            all = fold_scores;
        } else {
            for (acc, new) in all.iter_mut().zip(fold_scores) {
                acc.extend(new);
            }
        }
        folds.push(FoldReport {
            fold,
            classifier_seed: classifier.seed,
            scene_seeds,
            cells,
        });
    }

    let p = cfg.policies.len();
    let mut summary = Vec::new();
    for (s, &n) in cfg.scenarios.iter().enumerate() {
        for (q, &policy) in cfg.policies.iter().enumerate() {
            let scores: Vec<&SceneScore> = all[s * p + q].iter().collect();
            summary.push(summarize(n, policy, &scores));
        }
    }

    Ok(EvaluationReport {
        version: REPORT_VERSION,
        config: cfg.clone(),
        config_hash: io::config_hash(cfg),
        bank_config_hash: bank.config_hash.clone(),
        master_seed: cfg.master_seed,
        folds,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_protocol_size() {
        let cfg = EvaluationConfig::default();
        let scenes = cfg.folds * cfg.scenes_per_fold * cfg.scenarios.len() * cfg.policies.len();
        assert_eq!(scenes, 2700);
        cfg.validate().unwrap();
    }

    #[test]
    fn scene_seeds_differ_across_cells() {
        let cfg = EvaluationConfig::default();
        let mut seeds: Vec<u64> = (0..3)
            .flat_map(|f| [2, 3, 4].into_iter().flat_map(move |n| (0..5).map(move |i| (f, n, i))))
            .map(|(f, n, i)| cfg.scene_seed(f, n, i))
            .collect();
        let total = seeds.len();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), total);
    }

    #[test]
    fn bad_fold_selection_is_rejected() {
        let cfg = EvaluationConfig {
            folds: 3,
            evaluated_folds: Some(vec![0, 3]),
            ..EvaluationConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg: EvaluationConfig =
            toml::from_str("folds = 4\nscenarios = [2]\npolicies = [\"feedback\"]\n[em]\nmax_iter = 20\n").unwrap();
        assert_eq!(cfg.folds, 4);
        assert_eq!(cfg.scenes_per_fold, 30);
        assert_eq!(cfg.policies, vec![Policy::Feedback]);
        assert_eq!(cfg.em.max_iter, 20);
        assert_eq!(cfg.em.tol, 1e-6);
    }

    #[test]
    fn summary_counts_skips_and_pools_errors() {
        let a = SceneScore {
            rmse: Some(10.0),
            squared_errors: vec![100.0],
            decisions: vec![Decision {
                predicted: Some(1),
                truth: 1,
            }],
            skipped: 0,
        };
        let b = SceneScore {
            rmse: Some(30.0),
            squared_errors: vec![900.0, 900.0, 900.0],
            decisions: vec![Decision {
                predicted: None,
                truth: 0,
            }],
            skipped: 1,
        };
        let c = summarize(2, Policy::None, &[&a, &b]);
        assert_eq!(c.mean_rmse, Some(20.0));
        assert!((c.pooled_rmse.unwrap() - (2800.0f64 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(c.classification_error, Some(50.0));
        assert_eq!(c.skipped_blocks, 1);
    }
}
