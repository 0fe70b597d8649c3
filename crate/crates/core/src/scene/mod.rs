//! Scene simulation: spatial rendering, source signals and head rotation.

pub mod config;
pub mod listener;
pub mod renderer;
pub mod run;
pub mod sources;

pub use config::{SceneConfig, SourceSpec, SOURCE_SLOTS};
pub use listener::{feedback_rotation, random_rotation, ListenerState, Policy};
pub use renderer::{render_block, BinauralRenderer, MeasuredHrir, SphericalHead, SphericalHeadConfig};
pub use run::{run_scene, BlockRecord, SceneContext, SceneOutcome};
pub use sources::{synth_class_signal, SoundClass};
