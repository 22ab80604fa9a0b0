//! Run configuration: a JSON file, overridden field by field by CLI flags.

use mdimpute::io::parse_scenario_json;
use mdimpute::{Error, ImputationMethod, Result, ScenarioParams};
use serde::Deserialize;

/// Default grid of Pr(R=1|Z=1) values, 0.05 to 0.85 by 0.1.
pub const DEFAULT_P_GRID: [f64; 9] = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85];

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Option<serde_json::Value>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub m: Option<usize>,
    pub bootstrap: Option<usize>,
    pub p_grid: Option<Vec<f64>>,
    pub replications: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            column: e.column().to_string(),
            message: e.to_string(),
        })?;
        // surface scenario and method problems at load time
        cfg.scenario()?;
        cfg.method()?;
        if let Some(grid) = &cfg.p_grid {
            validate_grid(grid)?;
        }
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<ScenarioParams> {
        match &self.scenario {
            None => Ok(ScenarioParams::default()),
            Some(v) => parse_scenario_json(&v.to_string()),
        }
    }

    pub fn method(&self) -> Result<Option<ImputationMethod>> {
        self.method.as_deref().map(str::parse).transpose()
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("p_grid is empty".into()));
    }
    match grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        Some(p) => Err(Error::InvalidParameter(format!("grid value {p} outside (0, 1)"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = RunConfig::parse("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.scenario().unwrap(), ScenarioParams::default());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(RunConfig::parse(r#"{"nn": 3}"#).is_err());
        assert!(RunConfig::parse(r#"{"scenario": {"p_z": 2}}"#).is_err());
        assert!(RunConfig::parse(r#"{"scenario": {"pz": 0.3}}"#).is_err());
        assert!(RunConfig::parse(r#"{"method": "mice"}"#).is_err());
        assert!(RunConfig::parse(r#"{"p_grid": [0.5, 1.0]}"#).is_err());
        assert!(RunConfig::parse(r#"{"n": -4}"#).is_err());
    }

    #[test]
    fn partial_scenario() {
        let c = RunConfig::parse(r#"{"scenario": {"p_miss_1": 0.25}, "n": 50, "method": "stoc-y"}"#).unwrap();
        assert_eq!(c.scenario().unwrap().p_miss_1, 0.25);
        assert_eq!(c.scenario().unwrap().p_z, 0.5);
        assert_eq!(c.method().unwrap(), Some(ImputationMethod::STOC_Y));
    }
}
