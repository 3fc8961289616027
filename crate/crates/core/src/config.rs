//! The TOML run configuration read by the command-line tool.
//!
//! ```toml
//! [dataset]
//! name = "toy"
//! frames_per_class = 100
//! cfo_low = -0.001
//! cfo_high = 0.001
//! t0_min = 2
//! t0_max = 12
//! beta_min = 0.1
//! beta_max = 1.0
//! snr_min_db = 8.0
//! snr_max_db = 13.0
//! snr_center_db = 10.5
//! frame_length = 4096
//! master_seed = 7
//!
//! [train]
//! max_epochs = 3
//! ```
//!
//! Every section except `[dataset]` may be omitted; unknown keys are errors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::GenerationConfig;
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::model::CapConfig;
use crate::preprocess::PreprocessConfig;
use crate::train::{Split, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesConfig {
    /// One network branch per listed feature, in this order.
    pub branches: Vec<FeatureKind>,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            branches: FeatureKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub filters: Vec<usize>,
    pub kernel: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let c = CapConfig::default();
        ModelConfig {
            filters: c.filters,
            kernel: c.kernel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
    All,
}

impl Partition {
    pub fn select<'a>(self, split: &'a Split, all: &'a [usize]) -> &'a [usize] {
        match self {
            Partition::Train => &split.train,
            Partition::Val => &split.val,
            Partition::Test => &split.test,
            Partition::All => all,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Frames of the training dataset used for the within-dataset report.
    pub partition: Partition,
    /// Frames of the second dataset used for cross-evaluation.
    pub cross_partition: Partition,
    /// Second dataset for `xeval` and `repro`.
    pub cross_dataset: Option<GenerationConfig>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            partition: Partition::Test,
            cross_partition: Partition::Test,
            cross_dataset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: GenerationConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn new(dataset: GenerationConfig) -> Self {
        RunConfig {
            dataset,
            preprocess: PreprocessConfig::default(),
            features: FeaturesConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if let Some(b) = &self.eval.cross_dataset {
            b.validate()?;
            if b.frame_length != self.dataset.frame_length {
                return Err(Error::Config("cross dataset must use the same frame length".into()));
            }
        }
        self.preprocess.validate()?;
        self.train.validate()?;
        self.cap_config().validate()
    }

    /// Network topology implied by the dataset, feature and model sections.
    pub fn cap_config(&self) -> CapConfig {
        CapConfig {
            frame_length: self.dataset.frame_length,
            classes: self.dataset.schemes.len(),
            filters: self.model.filters.clone(),
            kernel: self.model.kernel,
            branches: self.features.branches.clone(),
        }
    }

    /// The fully resolved configuration, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Writes the resolved configuration into `dir` as `config.toml`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("config.toml");
        fs::write(&p, self.to_toml()).map_err(|e| Error::io(&p, e))
    }
}
