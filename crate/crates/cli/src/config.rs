//! Run configuration document.

use std::path::{Path, PathBuf};

use eci_core::{EngineConfig, PopulationSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsFormat {
    Json,
    Tsv,
}

/// Which optional artifacts `simulate` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportToggles {
    pub format: MetricsFormat,
    /// Average-linkage merges and dominance pairs as `hierarchy.tsv`.
    pub hierarchy: bool,
    pub dot: bool,
    pub population: bool,
}

impl Default for ReportToggles {
    fn default() -> Self {
        ReportToggles {
            format: MetricsFormat::Json,
            hierarchy: false,
            dot: true,
            population: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, replaces both `population.seed` and `engine.rng_seed`.
    pub seed: Option<u64>,
    pub t_e: f64,
    pub output_dir: PathBuf,
    pub population: PopulationSpec,
    pub engine: EngineConfig,
    pub report: ReportToggles,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            t_e: 0.1,
            output_dir: PathBuf::from("out"),
            population: PopulationSpec::default(),
            engine: EngineConfig::default(),
            report: ReportToggles::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg.effective())
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.t_e) {
            return Err(CliError::Config(format!("t_e: {} outside [0, 1]", self.t_e)));
        }
        self.population
            .validate()
            .map_err(|e| CliError::Config(format!("population: {e}")))?;
        self.engine
            .validate()
            .map_err(|e| CliError::Config(format!("engine: {e}")))?;
        Ok(())
    }

    /// Applies the top-level seed to the population and engine.
    pub fn effective(mut self) -> RunConfig {
        if let Some(s) = self.seed {
            self.population.seed = s;
            self.engine.rng_seed = s;
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.seed = Some(seed);
        self.effective()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
