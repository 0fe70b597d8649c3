//! One TOML file configuring every stage of the pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CassError, Result};
use crate::frontend::{AuditoryFrontend, FrontendConfig};
use crate::localization::{bank::bank_hash, BankTrainingConfig, GaussianAzimuthBank};
use crate::scene::{BinauralRenderer, MeasuredHrir, SceneConfig, SphericalHead, SphericalHeadConfig};

use super::evaluation::EvaluationConfig;

/// Every section is optional; missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub frontend: FrontendConfig,
    pub head: SphericalHeadConfig,
    /// Directory of measured HRIR pairs; replaces the spherical head.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hrir_dir: Option<PathBuf>,
    pub localization: BankTrainingConfig,
    pub evaluation: EvaluationConfig,
    /// Fixed scene for `simulate`; a random scene is drawn when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneConfig>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CassError::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    pub fn frontend(&self) -> Result<AuditoryFrontend> {
        AuditoryFrontend::new(self.frontend.clone())
    }

    pub fn renderer(&self) -> Result<Box<dyn BinauralRenderer>> {
        let r: Box<dyn BinauralRenderer> = match &self.hrir_dir {
            Some(dir) => Box::new(MeasuredHrir::load_dir(dir)?),
            None => Box::new(SphericalHead::new(self.head.clone())),
        };
        if (r.sample_rate() - self.frontend.sample_rate).abs() > 1e-9 {
            return Err(CassError::Config(format!(
                "renderer runs at {} Hz but the front-end expects {} Hz",
                r.sample_rate(),
                self.frontend.sample_rate
            )));
        }
        Ok(r)
    }

    /// Loads a bank and checks that it was trained with these front-end,
    /// training and renderer settings.
    pub fn load_bank(&self, path: &Path, renderer: &dyn BinauralRenderer) -> Result<GaussianAzimuthBank> {
        let bank = GaussianAzimuthBank::load(path)?;
        let expected = bank_hash(&self.frontend, &self.localization, renderer);
        if bank.config_hash != expected {
            return Err(CassError::Config(format!(
                "azimuth bank `{}` was trained with different settings; retrain it with `train-loc`",
                path.display()
            )));
        }
        if bank.channels != self.frontend.num_channels {
            return Err(CassError::Config(format!(
                "bank has {} channels, front-end has {}",
                bank.channels, self.frontend.num_channels
            )));
        }
        Ok(bank)
    }
}
