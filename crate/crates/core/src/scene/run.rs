//! Closed-loop simulation of one scene, block by block.

use serde::{Deserialize, Serialize};

use crate::angle::{deg, rad, wrap_diff};
use crate::classifier::{classify_block, stream_features, SourceModels};
use crate::clustering::{fit_mixture, soft_masks, EmConfig};
use crate::error::{CassError, Result};
use crate::frontend::AuditoryFrontend;
use crate::harness::metrics::{match_streams, CumulativeRmse, Decision};
use crate::localization::{stack_block, GaussianAzimuthBank};
use crate::seed;

use super::config::SceneConfig;
use super::renderer::{render_block, BinauralRenderer};

/// Everything a scene run needs besides the scene itself.
pub struct SceneContext<'a> {
    pub frontend: &'a AuditoryFrontend,
    pub renderer: &'a dyn BinauralRenderer,
    pub bank: &'a GaussianAzimuthBank,
    pub models: &'a SourceModels,
    pub em: &'a EmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    /// Degrees.
    pub mean: f64,
    pub kappa: f64,
    pub weight: f64,
    pub class: Option<String>,
    pub posterior: Vec<f64>,
    pub frames_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceOutcome {
    pub class: String,
    /// Degrees.
    pub azimuth: f64,
    /// Index of the stream matched to this source.
    pub stream: Option<usize>,
    /// Degrees.
    pub estimate: Option<f64>,
    /// Wrapped estimate − truth, degrees.
    pub error: Option<f64>,
    pub predicted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block: usize,
    /// Look direction during the block, degrees.
    pub look_direction: f64,
    pub skipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    pub observations: usize,
    pub em_iterations: usize,
    pub loglik: Option<f64>,
    pub streams: Vec<StreamRecord>,
    pub sources: Vec<SourceOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    pub blocks: Vec<BlockRecord>,
    /// Cumulative circular RMSE over all non-skipped blocks and sources,
    /// degrees; `None` when every block was skipped.
    pub rmse: Option<f64>,
    pub decisions: Vec<Decision>,
    /// Ear signals of the analysed part of the scene, if requested.
    pub audio: Option<(Vec<f64>, Vec<f64>)>,
}

/// Runs a scene: per block, render with the current look direction, extract
/// cues, cluster azimuths, segregate and classify streams, then rotate the
/// head according to the policy.
pub fn run_scene(scene: &SceneConfig, ctx: &SceneContext<'_>, keep_audio: bool) -> Result<SceneOutcome> {
    let fcfg = ctx.frontend.config();
    scene.validate(fcfg.block_duration())?;
    let truth_classes: Vec<usize> = scene
        .sources
        .iter()
        .map(|s| {
            ctx.models
                .index_of(&s.class)
                .ok_or_else(|| CassError::Config(format!("source class `{}` has no trained model", s.class)))
        })
        .collect::<Result<_>>()?;
    let truths = scene.azimuths();
    let c = scene.sources.len();

    let pre = ctx.frontend.warmup_samples();
    let post = ctx.frontend.lookahead_samples();
    let signals = scene.source_signals(fcfg.sample_rate, pre, post)?;
    let block_len = fcfg.block_samples();
    let frames = fcfg.block_frames;
    let blocks = scene.num_blocks(fcfg.block_duration());

    let mut listener = scene.listener();
    let mut head_rng = seed::rng(scene.seed, &[seed::tag("head")]);
    let mut rmse = CumulativeRmse::default();
    let mut decisions = Vec::new();
    let mut records = Vec::with_capacity(blocks);
    let mut audio = keep_audio.then(|| (Vec::new(), Vec::new()));
    let mut last_mixture = None;

    for b in 0..blocks {
        if b > 0 {
            listener.advance(last_mixture.as_ref(), &mut head_rng);
        }
        let psi = listener.psi;
        let window = b * block_len..b * block_len + pre + block_len + post;
        let segments: Vec<(&[f64], f64)> = signals
            .iter()
            .zip(&truths)
            .map(|(s, &az)| (&s[window.clone()], az))
            .collect();
        let (left, right) = render_block(ctx.renderer, &segments, psi)?;
        if let Some((l, r)) = audio.as_mut() {
            l.extend_from_slice(&left[pre..pre + block_len]);
            r.extend_from_slice(&right[pre..pre + block_len]);
        }
        let block = ctx.frontend.analyze(&left, &right, pre, frames, psi)?;

        let mut record = BlockRecord {
            block: b,
            look_direction: deg(psi),
            skipped: false,
            skip_reason: None,
            observations: 0,
            em_iterations: 0,
            loglik: None,
            streams: Vec::new(),
            sources: Vec::new(),
        };
        let fitted = stack_block(&block, ctx.bank).and_then(|obs| {
            let fit = fit_mixture(
                &obs.azimuths,
                c,
                seed::derive(scene.seed, &[seed::tag("em"), b as u64]),
                ctx.em,
            )?;
            Ok((obs, fit))
        });
        let (obs, fit) = match fitted {
            Ok(v) => v,
            Err(e @ (CassError::EmptyObservations | CassError::TooFewObservations { .. })) => {
                record.skipped = true;
                record.skip_reason = Some(e.to_string());
                record.sources = scene
                    .sources
                    .iter()
                    .map(|s| SourceOutcome {
                        class: s.class.clone(),
                        azimuth: s.azimuth,
                        stream: None,
                        estimate: None,
                        error: None,
                        predicted: None,
                    })
                    .collect();
                decisions.extend(truth_classes.iter().map(|&t| Decision {
                    predicted: None,
                    truth: t,
                }));
                last_mixture = None;
                records.push(record);
                continue;
            }
            Err(e) => return Err(e),
        };

        let mix = &fit.mixture;
        let masks = soft_masks(block.frames, block.channels, &obs.azimuths, &obs.positions, mix);
        record.observations = obs.len();
        record.em_iterations = fit.iterations;
        record.loglik = Some(fit.loglik());
        let labels = ctx.models.labels();
        let stream_decisions: Vec<_> = (0..c)
            .map(|j| classify_block(&stream_features(&block, &masks, j), ctx.models))
            .collect();
        record.streams = stream_decisions
            .iter()
            .enumerate()
            .map(|(j, d)| StreamRecord {
                mean: deg(mix.means[j]),
                kappa: mix.kappas[j],
                weight: mix.weights[j],
                class: d.class.map(|i| labels[i].to_string()),
                posterior: d.posterior.clone(),
                frames_used: d.frames_used,
            })
            .collect();

        let assignment = match_streams(&mix.means, &truths);
        for (i, &j) in assignment.iter().enumerate() {
            let error = wrap_diff(mix.means[j] - truths[i]);
            rmse.push(mix.means[j], truths[i]);
            let predicted = stream_decisions[j].class;
            decisions.push(Decision {
                predicted,
                truth: truth_classes[i],
            });
            record.sources.push(SourceOutcome {
                class: scene.sources[i].class.clone(),
                azimuth: scene.sources[i].azimuth,
                stream: Some(j),
                estimate: Some(deg(mix.means[j])),
                error: Some(deg(error)),
                predicted: predicted.map(|p| labels[p].to_string()),
            });
        }
        last_mixture = Some(fit.mixture);
        records.push(record);
    }

    Ok(SceneOutcome {
        blocks: records,
        rmse: rmse.degrees(),
        decisions,
        audio,
    })
}

/// Look direction of each block, radians.
pub fn look_directions(outcome: &SceneOutcome) -> Vec<f64> {
    outcome.blocks.iter().map(|b| rad(b.look_direction)).collect()
}
