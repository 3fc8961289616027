//! Held-out evaluation and cross-dataset comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::signal::ModulationScheme;
use crate::train::{labels, score};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeAccuracy {
    pub scheme: ModulationScheme,
    pub support: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Frames whose true SNR lies in `[low_db, low_db + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrBin {
    pub low_db: i32,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub classes: Vec<ModulationScheme>,
    pub total: usize,
    pub correct: usize,
    pub p_cc: f64,
    pub per_scheme: Vec<SchemeAccuracy>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
    /// Row-normalized `counts`; rows of absent classes are all zero.
    pub confusion: Vec<Vec<f64>>,
    pub snr_bins: Vec<SnrBin>,
}

/// Ground truth for one evaluated frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    pub class: usize,
    pub snr_db: f64,
}

impl EvalReport {
    pub fn from_predictions(
        dataset: &str,
        classes: &[ModulationScheme],
        truth: &[Truth],
        predicted: &[usize],
    ) -> Result<EvalReport> {
        if truth.is_empty() {
            return Err(Error::invalid("nothing to evaluate: the split is empty"));
        }
        if truth.len() != predicted.len() {
            return Err(Error::shape("one prediction per frame is required"));
        }
        let c = classes.len();
        let mut counts = vec![vec![0usize; c]; c];
        let mut bins: Vec<SnrBin> = Vec::new();
        for (t, &p) in truth.iter().zip(predicted) {
            if t.class >= c || p >= c {
                return Err(Error::invalid(format!("class index out of range for {c} classes")));
            }
            counts[t.class][p] += 1;
            let low = t.snr_db.floor() as i32;
            let pos = match bins.binary_search_by_key(&low, |b| b.low_db) {
                Ok(i) => i,
                Err(i) => {
                    bins.insert(
                        i,
                        SnrBin {
                            low_db: low,
                            count: 0,
                            correct: 0,
                            accuracy: 0.0,
                        },
                    );
                    i
                }
            };
            bins[pos].count += 1;
            bins[pos].correct += (t.class == p) as usize;
        }
        for b in &mut bins {
            b.accuracy = b.correct as f64 / b.count as f64;
        }
        let correct: usize = (0..c).map(|i| counts[i][i]).sum();
        let confusion = counts
            .iter()
            .map(|row| {
                let n: usize = row.iter().sum();
                row.iter().map(|&v| if n == 0 { 0.0 } else { v as f64 / n as f64 }).collect()
            })
            .collect();
        let per_scheme = classes
            .iter()
            .enumerate()
            .map(|(i, &scheme)| {
                let support: usize = counts[i].iter().sum();
                SchemeAccuracy {
                    scheme,
                    support,
                    correct: counts[i][i],
                    accuracy: if support == 0 { 0.0 } else { counts[i][i] as f64 / support as f64 },
                }
            })
            .collect();
        Ok(EvalReport {
            dataset: dataset.to_string(),
            classes: classes.to_vec(),
            total: truth.len(),
            correct,
            p_cc: correct as f64 / truth.len() as f64,
            per_scheme,
            counts,
            confusion,
            snr_bins: bins,
        })
    }

    /// Pooled accuracy over the listed schemes, if any of them were evaluated.
    pub fn subset_accuracy(&self, schemes: &[ModulationScheme]) -> Option<f64> {
        let (n, k) = self
            .per_scheme
            .iter()
            .filter(|s| schemes.contains(&s.scheme))
            .fold((0, 0), |(n, k), s| (n + s.support, k + s.correct));
        (n > 0).then(|| k as f64 / n as f64)
    }

    pub fn scheme_accuracy(&self, scheme: ModulationScheme) -> Option<f64> {
        self.per_scheme
            .iter()
            .find(|s| s.scheme == scheme && s.support > 0)
            .map(|s| s.accuracy)
    }

    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for c in &self.classes {
            let _ = write!(s, ",{}", c.name());
        }
        s.push('\n');
        for (c, row) in self.classes.iter().zip(&self.confusion) {
            s.push_str(c.name());
            for v in row {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s
    }

    pub fn snr_csv(&self) -> String {
        let mut s = String::from("snr_bin_db,count,accuracy\n");
        for b in &self.snr_bins {
            let _ = writeln!(s, "{},{},{:.6}", b.low_db, b.count, b.accuracy);
        }
        s
    }

    pub fn scheme_csv(&self) -> String {
        let mut s = String::from("scheme,support,correct,accuracy\n");
        for r in &self.per_scheme {
            let _ = writeln!(s, "{},{},{},{:.6}", r.scheme.name(), r.support, r.correct, r.accuracy);
        }
        s
    }

    /// Writes `<stem>.json` and the CSV tables into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(self).expect("report serializes") + "\n";
        for (name, body) in [
            (format!("{stem}.json"), json),
            (format!("{stem}_confusion.csv"), self.confusion_csv()),
            (format!("{stem}_snr.csv"), self.snr_csv()),
            (format!("{stem}_schemes.csv"), self.scheme_csv()),
        ] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Evaluates `ckpt` on the given frames of `ds`.
pub fn evaluate(ckpt: &Checkpoint, ds: &Dataset, indices: &[usize]) -> Result<EvalReport> {
    if indices.is_empty() {
        return Err(Error::invalid("nothing to evaluate: the split is empty"));
    }
    if ckpt.network.config.frame_length != ds.manifest.frame_length {
        return Err(Error::Config(format!(
            "checkpoint expects {}-sample frames, dataset has {}",
            ckpt.network.config.frame_length, ds.manifest.frame_length
        )));
    }
    if !ds.manifest.preprocessed {
        return Err(Error::invalid("evaluation expects a preprocessed dataset"));
    }
    let y = labels(ds, &ckpt.classes)?;
    let (_, _, predicted) = score(&ckpt.network, ds, indices, &y, &ckpt.scaling)?;
    let truth: Vec<Truth> = indices
        .iter()
        .map(|&i| Truth {
            class: y[i],
            snr_db: ds.manifest.frames[i].snr_db,
        })
        .collect();
    EvalReport::from_predictions(&ds.manifest.config.name, &ckpt.classes, &truth, &predicted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDelta {
    pub scheme: ModulationScheme,
    pub within: f64,
    pub cross: f64,
    /// `cross − within`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossReport {
    pub trained_on: String,
    pub tested_on: String,
    pub within: EvalReport,
    pub cross: EvalReport,
    /// `cross.p_cc − within.p_cc`.
    pub delta_p_cc: f64,
    pub per_scheme: Vec<SchemeDelta>,
    pub warnings: Vec<String>,
}

pub const PSK_MSK: [ModulationScheme; 4] = [
    ModulationScheme::Bpsk,
    ModulationScheme::Qpsk,
    ModulationScheme::Psk8,
    ModulationScheme::Msk,
];

pub const QAM: [ModulationScheme; 3] = [ModulationScheme::Qam16, ModulationScheme::Qam64, ModulationScheme::Qam256];

impl CrossReport {
    /// Accuracy lost on the subset when moving to the other dataset, in
    /// percentage points.
    pub fn subset_drop(&self, schemes: &[ModulationScheme]) -> Option<f64> {
        Some(100.0 * (self.within.subset_accuracy(schemes)? - self.cross.subset_accuracy(schemes)?))
    }

    pub fn delta_csv(&self) -> String {
        let mut s = String::from("scheme,within,cross,delta\n");
        for d in &self.per_scheme {
            let _ = writeln!(s, "{},{:.6},{:.6},{:.6}", d.scheme.name(), d.within, d.cross, d.delta);
        }
        s
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        self.cross.write(dir, stem)?;
        let p = dir.join(format!("{stem}_cross.json"));
        let json = serde_json::to_string_pretty(self).expect("report serializes") + "\n";
        fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
        let p = dir.join(format!("{stem}_deltas.csv"));
        fs::write(&p, self.delta_csv()).map_err(|e| Error::io(&p, e))
    }
}

/// Compares a within-dataset report with the same checkpoint's results on a
/// second dataset.
pub fn cross_evaluate(ckpt: &Checkpoint, within: EvalReport, other: &Dataset, indices: &[usize]) -> Result<CrossReport> {
    let cross = evaluate(ckpt, other, indices)?;
    let mut warnings = Vec::new();
    let b = &other.manifest.config;
    match &ckpt.provenance {
        Some(p) if p.dataset.cfo_low == b.cfo_low && p.dataset.cfo_high == b.cfo_high => warnings.push(format!(
            "training and test datasets share the CFO range U({}, {}); this is a weak generalization test",
            b.cfo_low, b.cfo_high
        )),
        Some(_) => {}
        None => warnings.push("checkpoint carries no training provenance; CFO ranges not compared".into()),
    }
    if other.manifest.preprocess_config != ckpt.provenance.as_ref().and_then(|p| p.preprocess) {
        warnings.push("datasets were preprocessed with different settings".into());
    }
    let per_scheme = ckpt
        .classes
        .iter()
        .filter_map(|&s| {
            let (w, c) = (within.scheme_accuracy(s)?, cross.scheme_accuracy(s)?);
            Some(SchemeDelta {
                scheme: s,
                within: w,
                cross: c,
                delta: c - w,
            })
        })
        .collect();
    Ok(CrossReport {
        trained_on: within.dataset.clone(),
        tested_on: cross.dataset.clone(),
        delta_p_cc: cross.p_cc - within.p_cc,
        within,
        cross,
        per_scheme,
        warnings,
    })
}
