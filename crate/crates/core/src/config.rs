//! TOML configuration: one file drives both the simulator and the estimator.
//!
//! ```toml
//! [model]
//! preset = "aliengo"
//! extero_sensor = "lidar"
//!
//! [slip]
//! kappa = 100.0
//!
//! [fusion]
//! r1 = [0.01, 0.01, 0.01]
//!
//! [scenario]
//! seed = 3
//! duration = 60.0
//! ```
//!
//! Every section and field is optional; missing values take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attitude::AttitudeConfig;
use crate::contact::ContactConfig;
use crate::error::{Error, Result};
use crate::frames::{ExteroSensor, Extrinsics};
use crate::fusion::{FusionConfig, PipelineConfig};
use crate::legodom::SlipConfig;
use crate::model::RobotModel;
use crate::sim::{Platform, ScenarioConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `aliengo` or `anymal`.
    pub preset: String,
    pub extero_sensor: ExteroSensor,
    pub extrinsics: Extrinsics,
    /// Full robot description; replaces the preset when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robot: Option<RobotModel>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            preset: "aliengo".into(),
            extero_sensor: ExteroSensor::default(),
            extrinsics: Extrinsics::default(),
            robot: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub proprioceptive_only: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub contact: ContactConfig,
    pub slip: SlipConfig,
    pub attitude: AttitudeConfig,
    pub fusion: FusionConfig,
    pub estimator: EstimatorSection,
    pub scenario: ScenarioConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.robot()?.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable in TOML")
    }

    pub fn robot(&self) -> Result<RobotModel> {
        match &self.model.robot {
            Some(r) => Ok(r.clone()),
            None => RobotModel::preset(&self.model.preset),
        }
    }

    pub fn platform(&self) -> Result<Platform> {
        Ok(Platform {
            model: self.robot()?,
            extrinsics: self.model.extrinsics,
            extero_sensor: self.model.extero_sensor,
        })
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            model: self.robot()?,
            extrinsics: self.model.extrinsics,
            extero_sensor: self.model.extero_sensor,
            contact: self.contact.clone(),
            slip: self.slip.clone(),
            attitude: self.attitude.clone(),
            fusion: self.fusion.clone(),
            proprioceptive_only: self.estimator.proprioceptive_only,
        })
    }
}
