//! Defaults read from a TOML file named by `TWINMETA_CONFIG`. Command-line
//! flags override every value.

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_ENV: &str = "TWINMETA_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub level: Option<f64>,
    pub methods: Option<Vec<String>>,
    pub hn_scales: Option<Vec<f64>>,
    pub convention: Option<String>,
    pub alpha: Option<f64>,
    pub ci_level: Option<f64>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub mu_prior_sd: Option<f64>,
    pub hyper_upper: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// Reads the file named by the environment variable, if set.
    pub fn from_env() -> CliResult<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(path, e))?;
                Self::parse(&text)
            }
            None => Ok(Self::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_file() {
        let c = FileConfig::parse("level = 0.9\nhn_scales = [0.25, 0.5]\n").unwrap();
        assert_eq!(c.level, Some(0.9));
        assert_eq!(c.hn_scales, Some(vec![0.25, 0.5]));
        assert_eq!(c.seed, None);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FileConfig::parse("levle = 0.9\n").is_err());
    }
}
