//! Flat `key = value` experiment configuration with dotted keys, e.g.
//!
//! ```text
//! traffic.lambda_f = 0.25
//! traffic.lambda_c = 0.25
//! traffic.mu       = 1.0
//! node.capacity    = 1.0
//! run.horizon      = 2e5
//! run.replications = 10000
//! run.seed         = 1
//! run.delta        = 0.01
//! ```
//!
//! `#` starts a comment; unknown keys are rejected so typos fail loudly.

use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lambda_f: f64,
    pub lambda_c: f64,
    pub mu: f64,
    pub capacity: f64,
    /// Simulated time per run, seconds.
    pub horizon: f64,
    /// Independent replications for envelope checks.
    pub replications: usize,
    pub seed: u64,
    /// Confidence parameter of the DKW band.
    pub delta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lambda_f: 0.25,
            lambda_c: 0.25,
            mu: 1.0,
            capacity: 1.0,
            horizon: 4e5,
            replications: 10_000,
            seed: 1,
            delta: 0.01,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                ConfigError(format!("line {}: {key}: invalid {what} '{value}'", lineno + 1))
            };
            match key {
                "traffic.lambda_f" => cfg.lambda_f = value.parse().map_err(|_| bad("number"))?,
                "traffic.lambda_c" => cfg.lambda_c = value.parse().map_err(|_| bad("number"))?,
                "traffic.mu" => cfg.mu = value.parse().map_err(|_| bad("number"))?,
                "node.capacity" => cfg.capacity = value.parse().map_err(|_| bad("number"))?,
                "run.horizon" => cfg.horizon = value.parse().map_err(|_| bad("number"))?,
                "run.replications" => {
                    cfg.replications = value.parse().map_err(|_| bad("count"))?
                }
                "run.seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "run.delta" => cfg.delta = value.parse().map_err(|_| bad("number"))?,
                _ => return Err(ConfigError(format!("line {}: unknown key '{key}'", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lambda_f > 0.0) {
            return Err(ConfigError(format!("traffic.lambda_f must be > 0, got {}", self.lambda_f)));
        }
        if !(self.lambda_c >= 0.0) {
            return Err(ConfigError(format!(
                "traffic.lambda_c must be >= 0, got {}",
                self.lambda_c
            )));
        }
        if !(self.mu > 0.0) {
            return Err(ConfigError(format!("traffic.mu must be > 0, got {}", self.mu)));
        }
        if !(self.capacity > 0.0) {
            return Err(ConfigError(format!("node.capacity must be > 0, got {}", self.capacity)));
        }
        if !(self.horizon > 0.0) {
            return Err(ConfigError(format!("run.horizon must be > 0, got {}", self.horizon)));
        }
        if self.replications == 0 {
            return Err(ConfigError("run.replications must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError(format!("run.delta must lie in (0,1), got {}", self.delta)));
        }
        Ok(())
    }

    /// Total load of the node.
    pub fn rho(&self) -> f64 {
        (self.lambda_f + self.lambda_c) / (self.mu * self.capacity)
    }

    /// Stability of the single-flow scenario (crossing flow ignored).
    pub fn ensure_single_flow_stable(&self) -> Result<(), ConfigError> {
        let load = self.lambda_f / (self.mu * self.capacity);
        if load >= 1.0 {
            return Err(ConfigError(format!(
                "single-flow load lambda_f/(mu C) = {load:.3} >= 1; the queue is unstable"
            )));
        }
        Ok(())
    }

    /// Stability of the two-flow scenario.
    pub fn ensure_cross_traffic_stable(&self) -> Result<(), ConfigError> {
        let rho = self.rho();
        if rho >= 1.0 {
            return Err(ConfigError(format!(
                "total load rho = {rho:.3} >= 1; the queue is unstable"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# comment\n\
             traffic.lambda_f = 0.5 # inline\n\
             run.seed = 42\n\
             \n\
             run.horizon = 1e4\n",
        )
        .unwrap();
        assert_eq!(cfg.lambda_f, 0.5);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.horizon, 1e4);
        assert_eq!(cfg.lambda_c, ExperimentConfig::default().lambda_c);
    }

    #[test]
    fn parse_rejects_unknown_and_malformed() {
        assert!(ExperimentConfig::parse("bogus.key = 1\n").is_err());
        assert!(ExperimentConfig::parse("traffic.lambda_f 0.5\n").is_err());
        assert!(ExperimentConfig::parse("traffic.lambda_f = lots\n").is_err());
        assert!(ExperimentConfig::parse("run.delta = 1.5\n").is_err());
    }

    #[test]
    fn stability_checks() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.ensure_single_flow_stable().is_ok());
        assert!(cfg.ensure_cross_traffic_stable().is_ok());
        cfg.lambda_f = 1.1;
        assert!(cfg.ensure_single_flow_stable().is_err());
        assert!(cfg.ensure_cross_traffic_stable().is_err());
    }
}
