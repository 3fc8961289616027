//! Stratified splitting and the training loop.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, TrainingProvenance};
use crate::dataset::{Dataset, DatasetManifest};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureKind, FeatureScaling, ScalingStats};
use crate::model::{argmax, build_cap, sample_input, CapConfig, CapNetwork, SampleInput};
use crate::nn::{Adam, Parameterized};
use crate::signal::ModulationScheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.70,
            val_frac: 0.05,
            test_frac: 0.25,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_frac, self.val_frac, self.test_frac];
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions {f:?} must lie in [0, 1] and sum to 1")));
        }
        if self.train_frac == 0.0 {
            return Err(Error::Config("training fraction must be positive".into()));
        }
        Ok(())
    }

    /// `(train, val, test)` counts for a class of `n` frames.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let val = (n as f64 * self.val_frac).round() as usize;
        let test = ((n as f64 * self.test_frac).round() as usize).min(n - val);
        (n - val - test, val, test)
    }
}

/// Frame indices of each partition, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn split_dataset(manifest: &DatasetManifest, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if manifest.frames.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = Split {
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for scheme in ModulationScheme::ALL {
        let mut idx: Vec<usize> = manifest
            .frames
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| r.index)
            .collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 4 {
            return Err(Error::invalid(format!(
                "{scheme:?} has {} frames; at least 4 are needed to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let (tr, va, _) = spec.counts(idx.len());
        split.train.extend_from_slice(&idx[..tr]);
        split.val.extend_from_slice(&idx[tr..tr + va]);
        split.test.extend_from_slice(&idx[tr + va..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation result before stopping.
    pub patience: usize,
    /// Learning-rate multiplier applied after `lr_patience` epochs without a
    /// lower validation loss.
    pub lr_decay: f64,
    pub lr_patience: usize,
    pub seed: u64,
    /// Scale each feature kind to unit mean magnitude on the training frames.
    pub standardize_features: bool,
    pub split: SplitSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 60,
            patience: 8,
            lr_decay: 0.1,
            lr_patience: 3,
            seed: 1,
            standardize_features: true,
            split: SplitSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} invalid", self.learning_rate)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2 for batch statistics".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config(format!("lr_decay {} outside (0, 1]", self.lr_decay)));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub best: bool,
}

pub const LOG_HEADER: &str = "epoch,learning_rate,train_loss,train_accuracy,val_loss,val_accuracy,best";

pub fn log_csv(rows: &[EpochLog]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:e},{:.9},{:.6},{:.9},{:.6},{}",
            r.epoch, r.learning_rate, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.best as u8
        );
    }
    s
}

pub enum TrainEvent<'a> {
    Batch {
        epoch: usize,
        batch: usize,
        batches: usize,
        loss: f64,
    },
    Epoch(&'a EpochLog),
}

pub struct TrainOutcome {
    /// Weights of the best validation epoch.
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    pub split: Split,
    pub stopped_early: bool,
}

/// Class index of every frame: its scheme's position in `classes`.
pub fn labels(ds: &Dataset, classes: &[ModulationScheme]) -> Result<Vec<usize>> {
    ds.manifest
        .frames
        .iter()
        .map(|r| {
            classes
                .iter()
                .position(|&s| s == r.scheme)
                .ok_or_else(|| Error::invalid(format!("{:?} is not one of the network's classes", r.scheme)))
        })
        .collect()
}

/// Extracts, scales and converts the features of the given frames.
pub fn frame_inputs(
    ds: &Dataset,
    indices: &[usize],
    scaling: &FeatureScaling,
    kinds: &[FeatureKind],
) -> Result<Vec<SampleInput<f32>>> {
    indices
        .par_iter()
        .map(|&i| Ok(sample_input(&extract_features(&ds.frames[i])?, scaling, kinds)))
        .collect()
}

/// Feature gains fitted to the given frames, streamed in chunks.
pub fn calibrate_scaling(ds: &Dataset, indices: &[usize]) -> Result<FeatureScaling> {
    let mut stats = ScalingStats::default();
    for chunk in indices.chunks(32) {
        let sets = chunk
            .par_iter()
            .map(|&i| extract_features(&ds.frames[i]))
            .collect::<Result<Vec<_>>>()?;
        sets.iter().for_each(|s| stats.add(s));
    }
    stats.finish()
}

/// Mean cross-entropy and accuracy of inference-mode predictions.
pub fn score(
    net: &CapNetwork<f32>,
    ds: &Dataset,
    indices: &[usize],
    labels: &[usize],
    scaling: &FeatureScaling,
) -> Result<(f64, f64, Vec<usize>)> {
    let mut loss = 0.0;
    let mut correct = 0;
    let mut predicted = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(64) {
        let inputs = frame_inputs(ds, chunk, scaling, &net.config.branches)?;
        for (p, &i) in net.predict(&inputs)?.iter().zip(chunk) {
            let y = labels[i];
            loss -= p[y].max(1e-300).ln();
            let k = argmax(p);
            correct += (k == y) as usize;
            predicted.push(k);
        }
    }
    let n = indices.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n, predicted))
}

fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    // batch statistics need two samples; fold a lone leftover into its neighbour
    if out.len() > 1 && out.last().map_or(false, |b| b.len() < 2) {
        out.pop();
        let n = out.len();
        out[n - 1] = &order[(n - 1) * size..];
    }
    out
}

/// Trains `topology` on the preprocessed dataset `ds`, keeping the epoch with
/// the best validation accuracy (ties go to the lower validation loss).
pub fn train(
    ds: &Dataset,
    topology: &CapConfig,
    config: &TrainConfig,
    on_event: &mut dyn FnMut(TrainEvent),
) -> Result<TrainOutcome> {
    config.validate()?;
    if !ds.manifest.preprocessed {
        return Err(Error::invalid("training expects a preprocessed dataset"));
    }
    if topology.frame_length != ds.manifest.frame_length {
        return Err(Error::Config(format!(
            "model frame length {} differs from dataset frame length {}",
            topology.frame_length, ds.manifest.frame_length
        )));
    }
    let classes = ds.schemes().to_vec();
    if topology.classes != classes.len() {
        return Err(Error::Config(format!(
            "model has {} outputs for {} dataset classes",
            topology.classes,
            classes.len()
        )));
    }
    let labels = labels(ds, &classes)?;
    let split = split_dataset(&ds.manifest, &config.split)?;
    if split.train.len() < 2 {
        return Err(Error::invalid("training split has fewer than two frames"));
    }
    let val: &[usize] = if split.val.is_empty() { &split.train } else { &split.val };
    let scaling = if config.standardize_features {
        calibrate_scaling(ds, &split.train)?
    } else {
        FeatureScaling::default()
    };
    let mut net = build_cap::<f32>(topology, config.seed)?;
    let mut adam = Adam::new(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_0bde);
    let mut order = split.train.clone();

    let mut log = Vec::new();
    let mut best: Option<(f64, f64, usize, CapNetwork<f32>, u128)> = None;
    let mut best_loss = f64::INFINITY;
    let mut since_loss = 0;
    let mut stopped_early = false;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let bs = batches(&order, config.batch_size);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (bi, b) in bs.iter().enumerate() {
            let inputs = frame_inputs(ds, b, &scaling, &topology.branches)?;
            let y: Vec<usize> = b.iter().map(|&i| labels[i]).collect();
            net.zero_grads();
            let (loss, c) = net.train_batch(&inputs, &y)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training loss became {loss} at epoch {epoch}, batch {}",
                    bi + 1
                )));
            }
            adam.step(&mut net);
            if !net.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite weights after epoch {epoch}, batch {}",
                    bi + 1
                )));
            }
            loss_sum += loss * b.len() as f64;
            correct += c;
            on_event(TrainEvent::Batch {
                epoch,
                batch: bi + 1,
                batches: bs.len(),
                loss,
            });
        }
        let (val_loss, val_acc, _) = score(&net, ds, val, &labels, &scaling)?;
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("validation loss became {val_loss} at epoch {epoch}")));
        }
        let improved = match &best {
            None => true,
            Some((a, l, ..)) => val_acc > *a || (val_acc == *a && val_loss < *l),
        };
        let row = EpochLog {
            epoch,
            learning_rate: adam.lr,
            train_loss: loss_sum / order.len() as f64,
            train_accuracy: correct as f64 / order.len() as f64,
            val_loss,
            val_accuracy: val_acc,
            best: improved,
        };
        on_event(TrainEvent::Epoch(&row));
        log.push(row);
        if improved {
            best = Some((val_acc, val_loss, epoch, net.clone(), rng.get_word_pos()));
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            since_loss = 0;
        } else {
            since_loss += 1;
            if since_loss >= config.lr_patience {
                adam.lr *= config.lr_decay;
                since_loss = 0;
            }
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.2);
        if epoch - best_epoch >= config.patience && epoch < config.max_epochs {
            stopped_early = true;
            break;
        }
    }
    let (val_accuracy, val_loss, epoch, network, pos) = best.expect("at least one epoch ran");
    let shuffle_rng_word_pos = pos.to_string();
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            network,
            classes,
            scaling,
            provenance: Some(TrainingProvenance {
                dataset: ds.manifest.config.clone(),
                preprocess: ds.manifest.preprocess_config,
                train: config.clone(),
                epoch,
                val_accuracy,
                val_loss,
                shuffle_rng_word_pos,
            }),
        },
        log,
        split,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FrameRecord, GenerationConfig};

    fn manifest(per_class: &[(ModulationScheme, usize)]) -> DatasetManifest {
        let mut frames = Vec::new();
        for &(s, n) in per_class {
            for _ in 0..n {
                frames.push(FrameRecord {
                    index: frames.len(),
                    scheme: s,
                    t0: 8,
                    beta: Some(0.5),
                    f0: 0.0,
                    snr_db: 10.0,
                    seed: 0,
                    offset: 0,
                    preprocessing: None,
                });
            }
        }
        DatasetManifest {
            format_version: 1,
            frames_file: "f".into(),
            frame_length: 64,
            frame_count: frames.len(),
            preprocessed: true,
            config: GenerationConfig::ml2018(),
            preprocess_config: None,
            generation_notes: vec![],
            frames,
        }
    }

    #[test]
    fn split_counts_for_a_thousand_per_class() {
        let m = manifest(&ModulationScheme::ALL.map(|s| (s, 1000)));
        let s = split_dataset(&m, &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (5600, 400, 2000));
        for scheme in ModulationScheme::ALL {
            let count = |v: &[usize]| v.iter().filter(|&&i| m.frames[i].scheme == scheme).count();
            assert_eq!((count(&s.train), count(&s.val), count(&s.test)), (700, 50, 250));
        }
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let m = manifest(&[(ModulationScheme::Bpsk, 37), (ModulationScheme::Qam64, 11)]);
        let spec = SplitSpec { seed: 9, ..SplitSpec::default() };
        let a = split_dataset(&m, &spec).unwrap();
        assert_eq!(a, split_dataset(&m, &spec).unwrap());
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..48).collect::<Vec<_>>());
        let other = split_dataset(&m, &SplitSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn tiny_classes_are_rejected() {
        let m = manifest(&[(ModulationScheme::Bpsk, 10), (ModulationScheme::Msk, 3)]);
        assert!(split_dataset(&m, &SplitSpec::default()).is_err());
        assert!(split_dataset(&manifest(&[]), &SplitSpec::default()).is_err());
    }

    #[test]
    fn bad_fractions_are_rejected() {
        let spec = SplitSpec {
            train_frac: 0.7,
            val_frac: 0.1,
            test_frac: 0.25,
            seed: 0,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn leftover_single_sample_joins_the_last_batch() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![4, 5]);
        let b = batches(&order, 3);
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn log_csv_has_one_row_per_epoch() {
        let row = EpochLog {
            epoch: 1,
            learning_rate: 1e-3,
            train_loss: 1.0,
            train_accuracy: 0.5,
            val_loss: 0.9,
            val_accuracy: 0.6,
            best: true,
        };
        let csv = log_csv(&[row.clone(), EpochLog { epoch: 2, best: false, ..row }]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], LOG_HEADER);
        assert!(lines[1].starts_with("1,1e-3,"));
        assert!(lines[2].ends_with(",0"));
    }
}
