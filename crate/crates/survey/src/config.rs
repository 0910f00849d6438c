//! Service configuration, read from a TOML file.
//!
//! ```toml
//! host = "127.0.0.1"
//! port = 8080
//! seed = 7                      # optional, overrides the survey's order seed
//! survey = "survey.json"
//! data_dir = "survey-data"
//! sessions_dir = "curation"     # optional, enables /curation endpoints
//! static_dir = "ui/dist"        # optional, serves the UI bundle
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::SurveyError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default)]
    pub seed: Option<u64>,
    pub survey: PathBuf,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default)]
    pub sessions_dir: Option<PathBuf>,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

fn default_host() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_data_dir() -> PathBuf {
    "survey-data".into()
}

impl ServiceConfig {
    pub fn new(survey: impl Into<PathBuf>) -> Self {
        Self {
            host: default_host(),
            port: default_port(),
            seed: None,
            survey: survey.into(),
            data_dir: default_data_dir(),
            sessions_dir: None,
            static_dir: None,
        }
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, SurveyError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| SurveyError::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.survey);
        resolve(&mut cfg.data_dir);
        if let Some(p) = cfg.sessions_dir.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.static_dir.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SurveyError> {
        let text = std::fs::read_to_string(path).map_err(|e| SurveyError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn addr(&self) -> Result<SocketAddr, SurveyError> {
        format!("{}:{}", self.host, self.port)
            .parse()
            .map_err(|e| SurveyError::Config(format!("bad address {}:{}: {e}", self.host, self.port)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_relative_paths() {
        let cfg = ServiceConfig::parse("port = 9000\nseed = 3\nsurvey = \"s.json\"\nstatic_dir = \"/abs/ui\"\n", Path::new("/etc/p"))
            .unwrap();
        assert_eq!(cfg.port, 9000);
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.survey, Path::new("/etc/p/s.json"));
        assert_eq!(cfg.data_dir, Path::new("/etc/p/survey-data"));
        assert_eq!(cfg.static_dir.as_deref(), Some(Path::new("/abs/ui")));
        assert_eq!(cfg.addr().unwrap().port(), 9000);
        assert!(ServiceConfig::parse("survey = \"s\"\nbogus = 1\n", Path::new(".")).is_err());
        assert!(ServiceConfig::parse("port = 1\n", Path::new(".")).is_err());
    }
}
