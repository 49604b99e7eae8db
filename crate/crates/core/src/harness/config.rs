//! Run configuration loaded from TOML.
//!
//! Every section is optional and falls back to defaults; unknown keys
//! anywhere are rejected with the dotted path of the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::harness::data::{load_features, synth, FeatureDataset, FeatureFormat, SyntheticSpec};
use crate::hashing::HashConfig;
use crate::mann::{EpisodeConfig, Pipeline};
use crate::metrics::{CostModel, SweepSpec};
use crate::tcam::TcamConfig;
use crate::{rng_from_seed, Error, Result};

/// Where feature vectors come from. `path` takes precedence over the
/// synthetic spec.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<FeatureFormat>,
    pub synthetic: SyntheticSpec,
}

impl DataConfig {
    pub fn load(&self) -> Result<FeatureDataset> {
        match &self.path {
            Some(p) => load_features(
                p,
                self.format.unwrap_or_else(|| FeatureFormat::from_path(p)),
            ),
            None => synth(&self.synthetic, &mut rng_from_seed(self.synthetic.seed)),
        }
    }
}

/// Everything a subcommand needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub device: DeviceParams,
    pub tcam: TcamConfig,
    pub hashing: HashConfig,
    pub episode: EpisodeConfig,
    pub cost: CostModel,
    pub data: DataConfig,
    pub sweep: SweepSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            device: DeviceParams::default(),
            tcam: TcamConfig::default(),
            hashing: HashConfig::default(),
            episode: EpisodeConfig::default(),
            cost: CostModel::default(),
            data: DataConfig::default(),
            sweep: SweepSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            msg: e.to_string(),
        })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        Ok(cfg.resolved())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { path: key, msg } => Error::Config {
                path: key,
                msg: format!("{msg} (in {})", path.display()),
            },
            other => other,
        })
    }

    /// Propagates the top-level seed and the hashing word length into the
    /// sections that consume them.
    pub fn resolved(mut self) -> Self {
        self.episode.seed = self.seed;
        self.tcam.word_len = self.hashing.bits;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.tcam.validate()?;
        self.episode.validate()?;
        self.cost.validate()?;
        self.sweep.validate()
    }

    pub fn pipeline(&self) -> Pipeline {
        Pipeline {
            device: self.device,
            hashing: self.hashing,
            tcam: self.tcam,
            cost: self.cost.clone(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            path: String::new(),
            msg: e.to_string(),
        })
    }
}
