//! Cross-validated evaluation and scoring.

pub mod evaluation;
pub mod metrics;
pub mod pool;
pub mod settings;
