//! Runtime configuration, loadable from TOML or JSON.
//!
//! ```toml
//! [risk]
//! dynamic_radius = 2.0
//! [risk.weights.categories]
//! pedestrian = 1.0
//! [planner]
//! risk_threshold = 0.4
//! strategy = "global"
//! [service]
//! window_radius = 30.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eval::BrakingConfig;
use crate::planner::PlannerConfig;
use crate::risk_model::RiskConfig;
use crate::scenario::ScenarioError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// radius of the risk window returned with each plan, meters
    pub window_radius: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { window_radius: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub risk: RiskConfig,
    pub planner: PlannerConfig,
    pub service: ServiceConfig,
    pub braking: BrakingConfig,
}

impl AppConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.risk.validate()?;
        self.planner
            .validate()
            .map_err(|e| ScenarioError::Config(e.to_string()))?;
        if !(self.service.window_radius.is_finite() && self.service.window_radius >= 0.0) {
            return Err(ScenarioError::Config("service.window_radius must be >= 0".into()));
        }
        self.braking.validate()
    }

    /// Parses `text` as JSON when `json` is set, TOML otherwise, then validates.
    pub fn parse(text: &str, json: bool, location: &str) -> Result<Self, ScenarioError> {
        let cfg: AppConfig = if json {
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
                location: format!("{location}:{}", e.line()),
                message: e.to_string(),
            })?
        } else {
            toml::from_str(text).map_err(|e| ScenarioError::Parse {
                location: location.to_string(),
                message: e.to_string(),
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json, &path.display().to_string())
    }
}
