//! Binaural localization and stream segregation.
//!
//! Two-channel ear signals are decomposed by an auditory front-end into
//! per time-frequency unit ITD/ILD cues and ratemaps. Each unit is mapped to
//! an absolute azimuth by a bank of Gaussian likelihood models, the azimuths
//! of a block are clustered with a mixture of von Mises distributions, and
//! the resulting soft masks split the ratemap into one stream per source.
//! Streams are classified with per-class Gaussian mixture models, and a
//! simulated listener can rotate its head to improve the estimates.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod classifier;
pub mod clustering;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod io;
pub mod localization;
pub mod scene;
pub mod seed;
pub mod selftest;

pub use error::{CassError, Result};
