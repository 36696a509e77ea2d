//! Project-wide defaults, read from a TOML file.
//!
//! ```toml
//! [parse]
//! delimiter = ";"
//!
//! [inference]
//! diversity_threshold = 12
//! date_formats = ["YYYY-MM-DD", "DD.MM.YYYY"]
//!
//! [heuristics]
//! max_conjunctive_filters = 1
//!
//! [runtime]
//! enable_mutation = false
//! ```
//!
//! Every section and key is optional.

use serde::{Deserialize, Serialize};

use crate::conversation::HeuristicConfig;
use crate::ingest::ParseConfig;
use crate::runtime::RuntimeConfig;
use crate::schema::InferenceConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub parse: ParseConfig,
    pub inference: InferenceConfig,
    pub heuristics: HeuristicConfig,
    pub runtime: RuntimeConfig,
}

#[derive(Debug, thiserror::Error)]
#[error("invalid config file: {0}")]
pub struct ConfigError(String);

impl ProjectConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = ProjectConfig::from_toml(
            "[parse]\ndelimiter = \";\"\n[inference]\ndiversity_threshold = 12\ndate_formats = [\"DD.MM.YYYY\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.parse.delimiter, ';');
        assert_eq!(cfg.parse.quote, '"');
        assert_eq!(cfg.inference.diversity_threshold, 12);
        assert_eq!(cfg.inference.date_formats[0].pattern(), "DD.MM.YYYY");
        assert_eq!(cfg.runtime.match_threshold, 0.5);
    }

    #[test]
    fn rejects_unknown_sections_and_bad_formats() {
        assert!(ProjectConfig::from_toml("[nope]\n").is_err());
        assert!(ProjectConfig::from_toml("[inference]\ndate_formats = [\"YYYY\"]\n").is_err());
    }
}
