//! End-to-end runs at reduced resolution: 16 channels, 5° azimuth grid.

use std::sync::OnceLock;

use cass_core::classifier::SourceModels;
use cass_core::frontend::{AuditoryFrontend, FrontendConfig};
use cass_core::harness::evaluation::{run_evaluation, EvaluationConfig};
use cass_core::harness::pool::train_pool_models;
use cass_core::localization::{train_bank, BankTrainingConfig, GaussianAzimuthBank};
use cass_core::scene::{run_scene, Policy, SceneConfig, SceneContext, SoundClass, SphericalHead};

struct Fixture {
    frontend: AuditoryFrontend,
    head: SphericalHead,
    bank: GaussianAzimuthBank,
    models: SourceModels,
    eval: EvaluationConfig,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let frontend = AuditoryFrontend::new(FrontendConfig {
            num_channels: 16,
            ..Default::default()
        })
        .unwrap();
        let head = SphericalHead::default();
        let bank = train_bank(
            &head,
            &frontend,
            &BankTrainingConfig {
                num_azimuths: 72,
                duration: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        let mut eval = EvaluationConfig {
            folds: 3,
            scenes_per_fold: 2,
            evaluated_folds: Some(vec![1]),
            scenarios: vec![2, 3],
            scene_duration: 1.0,
            classes: Some(vec![SoundClass::Siren, SoundClass::Engine, SoundClass::DogBark]),
            ..Default::default()
        };
        eval.classifier.gmm.components = 4;
        let models = train_pool_models(
            &eval.pool().unwrap(),
            None,
            eval.folds,
            &frontend,
            &head,
            &eval.training,
            &eval.classifier,
        )
        .unwrap();
        Fixture {
            frontend,
            head,
            bank,
            models,
            eval,
        }
    })
}

fn ctx(f: &Fixture) -> SceneContext<'_> {
    SceneContext {
        frontend: &f.frontend,
        renderer: &f.head,
        bank: &f.bank,
        models: &f.models,
        em: &f.eval.em,
    }
}

#[test]
fn bank_survives_a_round_trip() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.json");
    f.bank.save(&path).unwrap();
    assert_eq!(GaussianAzimuthBank::load(&path).unwrap(), f.bank);
}

#[test]
fn scenes_are_reproducible_and_well_formed() {
    let f = fixture();
    let labels: Vec<String> = f.models.labels().into_iter().map(String::from).collect();
    let scene = SceneConfig::random(2, &labels, Policy::Feedback, 5.0, 11).unwrap();
    let a = run_scene(&scene, &ctx(f), true).unwrap();
    let b = run_scene(&scene, &ctx(f), false).unwrap();
    assert_eq!(a.blocks, b.blocks);
    assert_eq!(a.blocks.len(), 6);
    let (l, r) = a.audio.unwrap();
    assert_eq!(l.len(), 6 * f.frontend.config().block_samples());
    assert_eq!(l.len(), r.len());
    for rec in &a.blocks {
        assert!((10.0..=170.0).contains(&rec.look_direction));
        assert_eq!(rec.sources.len(), 2);
    }
    // the first block is heard from the initial look direction
    assert_eq!(a.blocks[0].look_direction, 90.0);
}

#[test]
fn feedback_turns_the_head_and_none_does_not() {
    let f = fixture();
    let labels: Vec<String> = f.models.labels().into_iter().map(String::from).collect();
    let base = SceneConfig::random(2, &labels, Policy::None, 5.0, 4).unwrap();
    let still = run_scene(&base, &ctx(f), false).unwrap();
    assert!(still.blocks.iter().all(|b| b.look_direction == 90.0));
    let turning = run_scene(
        &SceneConfig {
            policy: Policy::Feedback,
            ..base
        },
        &ctx(f),
        false,
    )
    .unwrap();
    assert!(turning.blocks.iter().any(|b| b.look_direction != 90.0));
}

#[test]
fn evaluation_is_deterministic() {
    let f = fixture();
    let run = || run_evaluation(&f.eval, &f.frontend, &f.head, &f.bank, |_| {}).unwrap();
    let (a, b) = (run(), run());
    let ja = serde_json::to_string(&a).unwrap();
    assert_eq!(ja, serde_json::to_string(&b).unwrap());
    assert_eq!(a.summary.len(), 2 * 3);
    for cell in &a.summary {
        assert_eq!(cell.scenes, 2);
        assert!(cell.mean_rmse.is_some());
    }
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 7);
}

#[test]
fn evaluation_names_missing_classes() {
    let f = fixture();
    let cfg = EvaluationConfig {
        scenarios: vec![4],
        ..f.eval.clone()
    };
    let err = run_evaluation(&cfg, &f.frontend, &f.head, &f.bank, |_| {}).unwrap_err();
    assert!(err.to_string().contains("distinct classes"), "{err}");
}
