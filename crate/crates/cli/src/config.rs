//! TOML configuration files and run manifests.

use std::path::Path;

use gas_core::aggregators::Adversary;
use gas_core::fedsim::ExperimentConfig;
use gas_core::AggregatorSpec;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult, ARTIFACT_VERSION};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Parses and validates an experiment config.
pub fn parse_experiment(text: &str) -> CliResult<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn load_experiment(path: &Path) -> CliResult<ExperimentConfig> {
    parse_experiment(&read_text(path)?)
}

/// The canonical form of a config: parsing it back gives the same value and
/// emitting that value gives the same bytes.
pub fn emit_experiment(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("experiment configs always serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestOutputs {
    pub rounds_csv: String,
    pub summary: String,
}

/// Everything needed to reproduce one run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub artifact_version: String,
    pub master_seed: u64,
    pub record_timing: bool,
    pub outputs: ManifestOutputs,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig, record_timing: bool) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION.to_owned(),
            master_seed: config.seed,
            record_timing,
            outputs: ManifestOutputs {
                rounds_csv: "rounds.csv".into(),
                summary: "summary.txt".into(),
            },
            config,
        }
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("manifests always serialize")
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn default_trials() -> usize {
    1000
}
fn default_dim() -> usize {
    10
}

/// Parameters of a resilience certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub n: usize,
    pub f: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub aggregator: AggregatorSpec,
    #[serde(default)]
    pub adversary: Adversary,
}

pub fn load_certify(path: &Path) -> CliResult<CertifyConfig> {
    toml::from_str(&read_text(path)?).map_err(|e| CliError::Config(e.to_string()))
}

/// Builds an aggregator from its config name with default hyperparameters.
pub fn aggregator_by_name(name: &str) -> CliResult<AggregatorSpec> {
    toml::from_str::<AggregatorSpec>(&format!("kind = \"{name}\""))
        .map_err(|_| CliError::Config(format!("unknown aggregator `{name}`")))
}
