//! Run configuration: a TOML file, overridden by command-line flags.
//!
//! ```toml
//! store = "store"             # corpus store directory
//! seed = 7                    # fanned out to every random consumer
//! output_dir = "runs"         # manifests and default outputs
//! variants = ["base", "src-meta", "meta-src"]
//! backend = "stub"            # or "http" (needs the `live` feature)
//!
//! [live]
//! endpoint = "https://api.example.com/v1/chat/completions"
//! model = "some-model"
//! timeout_secs = 60
//!
//! [train]                     # overrides on top of the toy training preset
//! bt_iterations = 3
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use perspectra::transfer::{TrainConfig, Variant};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CONFIG_FILE: &str = "perspectra.toml";
const OPTIONAL_TRAIN_KEYS: [&str; 2] = ["sampling_temperature", "total_steps"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub store: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub variants: Vec<String>,
    pub backend: BackendKind,
    pub live: Option<LiveConfig>,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            store: None,
            seed: 7,
            output_dir: "runs".into(),
            variants: ["base", "src-meta", "meta-src"].map(String::from).to_vec(),
            backend: BackendKind::Stub,
            live: None,
            train: TrainConfig::toy(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    store: Option<PathBuf>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    variants: Option<Vec<String>>,
    backend: Option<BackendKind>,
    live: Option<LiveConfig>,
    train: Option<toml::Table>,
}

impl RunConfig {
    /// Parse `text`; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).context("parsing run config")?;
        let mut cfg = Self::default();
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        if let Some(store) = file.store {
            cfg.store = Some(resolve(store));
        }
        if let Some(dir) = file.output_dir {
            cfg.output_dir = resolve(dir);
        }
        cfg.seed = file.seed.unwrap_or(cfg.seed);
        cfg.variants = file.variants.unwrap_or(cfg.variants);
        cfg.backend = file.backend.unwrap_or(cfg.backend);
        cfg.live = file.live;
        if let Some(overrides) = file.train {
            let mut table = toml::Table::try_from(&cfg.train).context("encoding training preset")?;
            for key in overrides.keys() {
                // optional fields are absent from the encoded preset
                if !table.contains_key(key) && !OPTIONAL_TRAIN_KEYS.contains(&key.as_str()) {
                    bail!("[train]: unknown key `{key}`");
                }
            }
            table.extend(overrides);
            cfg.train = table.try_into().context("[train] table")?;
        }
        cfg.variants()?;
        Ok(cfg)
    }

    /// Explicit file if given, else `perspectra.toml` in the working directory if present.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None if Path::new(DEFAULT_CONFIG_FILE).is_file() => PathBuf::from(DEFAULT_CONFIG_FILE),
            None => return Ok(Self::default()),
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn variants(&self) -> Result<Vec<Variant>> {
        self.variants
            .iter()
            .map(|v| v.parse::<Variant>().map_err(anyhow::Error::msg))
            .collect()
    }

    pub fn store(&self) -> Result<&Path> {
        match &self.store {
            Some(p) => Ok(p),
            None => bail!("no corpus store given: pass --store or set `store` in the config file"),
        }
    }

    /// Training settings with the run seed applied.
    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}
