//! Binary checkpoints: `CYCK`, a format version, a length-prefixed JSON
//! header, then every parameter and batch-norm running statistic as raw
//! little-endian `f32`, in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::GenerationConfig;
use crate::error::{Error, Result};
use crate::features::FeatureScaling;
use crate::model::{build_cap, CapConfig, CapNetwork};
use crate::nn::Parameterized;
use crate::preprocess::PreprocessConfig;
use crate::signal::ModulationScheme;
use crate::train::TrainConfig;

pub const MAGIC: &[u8; 4] = b"CYCK";
pub const FORMAT_VERSION: u32 = 1;

/// Name and element count of one stored array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Where the weights came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingProvenance {
    pub dataset: GenerationConfig,
    pub preprocess: Option<PreprocessConfig>,
    pub train: TrainConfig,
    pub epoch: usize,
    pub val_accuracy: f64,
    pub val_loss: f64,
    /// Word position of the shuffling generator (seeded from the training
    /// seed) when this epoch ended, in decimal.
    pub shuffle_rng_word_pos: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub topology: CapConfig,
    /// Class index → scheme.
    pub classes: Vec<ModulationScheme>,
    pub scaling: FeatureScaling,
    pub provenance: Option<TrainingProvenance>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: CapNetwork<f32>,
    pub classes: Vec<ModulationScheme>,
    pub scaling: FeatureScaling,
    pub provenance: Option<TrainingProvenance>,
}

fn running_stats(net: &CapNetwork<f32>) -> Vec<(String, &[f32])> {
    let mut out = Vec::new();
    for b in &net.branches {
        for (i, blk) in b.blocks.iter().enumerate() {
            let base = format!("{}.block{}.bn", b.kind, i + 1);
            out.push((format!("{base}.running_mean"), &blk.bn.running_mean[..]));
            out.push((format!("{base}.running_var"), &blk.bn.running_var[..]));
        }
    }
    out
}

impl Checkpoint {
    pub fn header(&self) -> CheckpointHeader {
        let mut tensors = Vec::new();
        self.network.visit_params(&mut |p| {
            tensors.push(TensorEntry {
                name: p.name.clone(),
                shape: p.shape.clone(),
            })
        });
        for (name, v) in running_stats(&self.network) {
            tensors.push(TensorEntry { name, shape: vec![v.len()] });
        }
        CheckpointHeader {
            topology: self.network.config.clone(),
            classes: self.classes.clone(),
            scaling: self.scaling,
            provenance: self.provenance.clone(),
            tensors,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("checkpoint header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + 4 * self.network.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let mut push = |v: &[f32]| v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
        self.network.visit_params(&mut |p| push(&p.value));
        for (_, v) in running_stats(&self.network) {
            push(v);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
        let bad = |r: &str| Error::format(path, r.to_string());
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported checkpoint version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        if header.classes.len() != header.topology.classes {
            return Err(bad("class list disagrees with topology"));
        }
        let mut net = build_cap::<f32>(&header.topology, 0).map_err(|e| bad(&e.to_string()))?;
        let expected = Checkpoint {
            network: net.clone(),
            classes: header.classes.clone(),
            scaling: header.scaling,
            provenance: None,
        }
        .header()
        .tensors;
        if expected != header.tensors {
            return Err(bad("tensor table does not match the topology"));
        }
        let mut values = bytes[12 + hlen..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let total: usize = expected.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        if bytes.len() - 12 - hlen != 4 * total {
            return Err(bad(&format!("expected {total} values after the header")));
        }
        net.visit_params_mut(&mut |p| {
            for v in p.value.iter_mut() {
                *v = values.next().unwrap();
            }
        });
        for b in &mut net.branches {
            for blk in &mut b.blocks {
                for v in blk.bn.running_mean.iter_mut().chain(blk.bn.running_var.iter_mut()) {
                    *v = values.next().unwrap();
                }
            }
        }
        Ok(Checkpoint {
            network: net,
            classes: header.classes,
            scaling: header.scaling,
            provenance: header.provenance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes, path)
    }

    /// Class index of `scheme`, if the network knows it.
    pub fn class_of(&self, scheme: ModulationScheme) -> Option<usize> {
        self.classes.iter().position(|&s| s == scheme)
    }
}
