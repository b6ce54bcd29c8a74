use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qubit_psr::experiment::{ExperimentConfig, OptimizerKind};
use serde::{Deserialize, Serialize};

/// Resolved settings for one invocation: config file values, then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub optimizer: OptimizerKind,
    /// Not echoed into artifacts so that outputs do not depend on where they are written.
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            optimizer: OptimizerKind::PsrAdam,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with the JSON object in `path`, if any.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("config file {} is not valid JSON", path.display()))?;
        if !value.is_object() {
            bail!("config file {} must contain a JSON object", path.display());
        }
        serde_json::from_value(value).with_context(|| format!("invalid settings in config file {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_match_reference_settings() {
        let c = RunConfig::default();
        let e = &c.experiment;
        assert_eq!((e.n_data, e.n_shots, e.n_epochs, e.n_layers), (25, 1024, 100, 3));
        assert_eq!((e.eta, e.eps_j), (0.1, 5e-3));
        assert_eq!(c.optimizer, OptimizerKind::PsrAdam);
    }

    #[test]
    fn file_values_overlay_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"n_layers": 2, "eta": 0.05, "optimizer": "cmaes"}}"#).unwrap();
        let c = RunConfig::load(Some(f.path())).unwrap();
        assert_eq!(c.experiment.n_layers, 2);
        assert_eq!(c.experiment.eta, 0.05);
        assert_eq!(c.experiment.n_data, 25);
        assert_eq!(c.optimizer, OptimizerKind::Cmaes);
    }

    #[test]
    fn bad_files_are_errors() {
        assert!(RunConfig::load(Some(Path::new("/nonexistent/config.json"))).is_err());
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "[1, 2]").unwrap();
        assert!(RunConfig::load(Some(f.path())).is_err());
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"n_layers": "three"}}"#).unwrap();
        assert!(RunConfig::load(Some(f.path())).is_err());
    }
}
