//! Strictly parsed JSON run configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{TimeGrid, VolumeGrid};
use crate::model::{LatticeModel, ModelParams, ModelRegistry};
use crate::verify::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    #[serde(rename = "L")]
    pub rate_cap: f64,
    #[serde(rename = "S0", skip_serializing_if = "Option::is_none", default)]
    pub spot: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none", default)]
    pub strike: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma: Option<f64>,
    #[serde(rename = "r", skip_serializing_if = "Option::is_none", default)]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tstar: Option<f64>,
}

impl ModelConfig {
    pub fn new(params: &ModelParams, horizon: f64, steps: usize, rate_cap: f64) -> Self {
        Self {
            kind: params.kind.clone(),
            horizon,
            steps,
            rate_cap,
            spot: params.spot,
            strike: params.strike,
            sigma: params.sigma,
            rate: params.rate,
            lambda: params.lambda,
            tstar: params.tstar,
        }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            kind: self.kind.clone(),
            spot: self.spot,
            strike: self.strike,
            sigma: self.sigma,
            rate: self.rate,
            lambda: self.lambda,
            tstar: self.tstar,
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub fn volume_grid(&self) -> Result<VolumeGrid> {
        VolumeGrid::new(&self.time_grid()?, self.rate_cap)
    }

    pub fn is_indicator(&self) -> bool {
        ModelRegistry::standard()
            .get(&self.kind)
            .map(|b| b.is_indicator())
            .unwrap_or(false)
    }

    pub fn build(&self) -> Result<(LatticeModel, VolumeGrid)> {
        let grid = self.time_grid()?;
        let volume = VolumeGrid::new(&grid, self.rate_cap)?;
        let model = ModelRegistry::standard().build(&self.params(), &grid)?;
        Ok((model, volume))
    }

    /// Same physical model with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            steps: self.steps * factor,
            ..self.clone()
        }
    }
}

fn default_paths() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Volume already consumed at t = 0.
    #[serde(default)]
    pub y0: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Re-checks every numeric invariant, including building the model.
    pub fn validate(&self) -> Result<()> {
        let (_, volume) = self.model.build()?;
        if !(self.y0 <= 1.0) {
            return Err(Error::param("y0", format!("must be at most 1, got {}", self.y0)));
        }
        if volume.level_of(self.y0).is_none() {
            return Err(Error::param(
                "y0",
                format!("{} is not a volume level (1 - j * {})", self.y0, volume.dy()),
            ));
        }
        if self.n_paths < 2 {
            return Err(Error::TooFewPaths(self.n_paths));
        }
        let t = &self.tolerances;
        if !(t.exact >= 0.0 && t.bspde_factor >= 0.0 && t.convergence_factor > 0.0) {
            return Err(Error::param("tolerances", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn start_level(&self) -> Result<usize> {
        let volume = self.model.volume_grid()?;
        volume
            .level_of(self.y0)
            .ok_or_else(|| Error::param("y0", "not a volume level"))
    }

    /// SHA-256 of the canonical JSON form of the (overridden) configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INDICATOR: &str = r#"{"model": {"kind": "indicator-exponential", "T": 1.0, "N": 20, "L": 1.0, "lambda": 1.0}, "y0": 0.0, "n_paths": 100, "seed": 7}"#;

    #[test]
    fn parses_and_hashes_deterministically() {
        let a = RunConfig::from_json(INDICATOR).unwrap();
        let b = RunConfig::from_json(INDICATOR).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.seed = 8;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.start_level().unwrap(), 20);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = INDICATOR.replace("\"seed\": 7", "\"seed\": 7, \"sede\": 1");
        assert!(RunConfig::from_json(&bad).is_err());
        let bad_model = INDICATOR.replace("\"lambda\": 1.0", "\"lambda\": 1.0, \"mu\": 0.1");
        assert!(RunConfig::from_json(&bad_model).is_err());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let neg = INDICATOR.replace("\"lambda\": 1.0", "\"lambda\": -1.0");
        let err = RunConfig::from_json(&neg).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
        let zero_steps = INDICATOR.replace("\"N\": 20", "\"N\": 0");
        assert!(RunConfig::from_json(&zero_steps).unwrap_err().to_string().contains('N'));
        let one_path = INDICATOR.replace("\"n_paths\": 100", "\"n_paths\": 1");
        assert!(matches!(RunConfig::from_json(&one_path), Err(Error::TooFewPaths(1))));
        let off_grid = INDICATOR.replace("\"y0\": 0.0", "\"y0\": 0.01");
        assert!(RunConfig::from_json(&off_grid).is_err());
    }

    #[test]
    fn tolerances_are_optional_and_strict() {
        let with = INDICATOR.replace("\"seed\": 7", "\"seed\": 7, \"tolerances\": {\"exact\": 1e-9}");
        assert_eq!(RunConfig::from_json(&with).unwrap().tolerances.exact, 1e-9);
        let typo = INDICATOR.replace("\"seed\": 7", "\"seed\": 7, \"tolerances\": {\"exakt\": 1e-9}");
        assert!(RunConfig::from_json(&typo).is_err());
    }
}
