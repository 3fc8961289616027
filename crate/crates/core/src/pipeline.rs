//! End-to-end runs: generate, preprocess, train and evaluate in both
//! directions across two dataset configurations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::dataset::{Dataset, GenerationConfig};
use crate::error::{Error, Result};
use crate::eval::{cross_evaluate, evaluate, CrossReport, EvalReport};
use crate::preprocess::{preprocess_dataset, PreprocessConfig};
use crate::train::{log_csv, split_dataset, train, TrainEvent};

/// Synthesizes and preprocesses a dataset in memory.
pub fn prepare(gen: &GenerationConfig, pre: &PreprocessConfig) -> Result<Dataset> {
    preprocess_dataset(&Dataset::generate(gen)?, pre)
}

/// Trains on `ds`, writes checkpoint and log under `dir` and returns the
/// checkpoint together with its within-dataset report.
pub fn train_and_report(
    cfg: &RunConfig,
    ds: &Dataset,
    dir: &Path,
    on_event: &mut dyn FnMut(TrainEvent),
) -> Result<(Checkpoint, EvalReport)> {
    let out = train(ds, &cfg.cap_config(), &cfg.train, on_event)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    out.checkpoint.save(&dir.join("model.ckpt"))?;
    let log = dir.join("train_log.csv");
    fs::write(&log, log_csv(&out.log)).map_err(|e| Error::io(&log, e))?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let report = evaluate(&out.checkpoint, ds, cfg.eval.partition.select(&out.split, &all))?;
    report.write(dir, "eval")?;
    Ok((out.checkpoint, report))
}

/// Evaluates `ckpt` on the configured partition of `other`.
pub fn cross_report(cfg: &RunConfig, ckpt: &Checkpoint, within: EvalReport, other: &Dataset) -> Result<CrossReport> {
    let split = split_dataset(&other.manifest, &cfg.train.split)?;
    let all: Vec<usize> = (0..other.len()).collect();
    cross_evaluate(ckpt, within, other, cfg.eval.cross_partition.select(&split, &all))
}

/// Accuracy of every (trained on, tested on) pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproSummary {
    pub datasets: [String; 2],
    /// `p_cc[train][test]`.
    pub p_cc: [[f64; 2]; 2],
    pub cross: Vec<CrossReport>,
}

impl ReproSummary {
    pub fn table(&self) -> String {
        let [a, b] = &self.datasets;
        let w = a.len().max(b.len()).max(10);
        let mut s = format!("{:<w$}  {:>w$}  {:>w$}\n", "train\\test", a, b);
        for (i, name) in self.datasets.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:<w$}  {:>w$.1}  {:>w$.1}",
                name,
                100.0 * self.p_cc[i][0],
                100.0 * self.p_cc[i][1]
            );
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("trained_on,tested_on,p_cc\n");
        for i in 0..2 {
            for j in 0..2 {
                let _ = writeln!(s, "{},{},{:.6}", self.datasets[i], self.datasets[j], self.p_cc[i][j]);
            }
        }
        s
    }
}

/// Runs the full two-dataset experiment into `out`.
pub fn repro(cfg: &RunConfig, out: &Path, log: &mut dyn FnMut(&str)) -> Result<ReproSummary> {
    cfg.validate()?;
    let second = cfg
        .eval
        .cross_dataset
        .clone()
        .ok_or_else(|| Error::Config("repro needs [eval.cross_dataset]".into()))?;
    let mut gens = [cfg.dataset.clone(), second];
    if gens[0].name == gens[1].name {
        gens[0].name.push_str("_a");
        gens[1].name.push_str("_b");
    }
    cfg.echo(out)?;
    let mut data = Vec::new();
    for g in &gens {
        log(&format!("generating {} ({} frames)", g.name, g.frames_per_class * g.schemes.len()));
        let ds = prepare(g, &cfg.preprocess)?;
        ds.save(&out.join("data").join(&g.name))?;
        data.push(ds);
    }
    let mut trained = Vec::new();
    for (g, ds) in gens.iter().zip(&data) {
        log(&format!("training on {}", g.name));
        let run = RunConfig {
            dataset: g.clone(),
            ..cfg.clone()
        };
        let mut on_event = |e: TrainEvent| {
            if let TrainEvent::Epoch(r) = e {
                log(&format!(
                    "  epoch {} train acc {:.3} val acc {:.3} val loss {:.4}",
                    r.epoch, r.train_accuracy, r.val_accuracy, r.val_loss
                ))
            }
        };
        trained.push(train_and_report(&run, ds, &out.join(format!("train_{}", g.name)), &mut on_event)?);
    }
    let mut p_cc = [[0.0; 2]; 2];
    let mut cross = Vec::new();
    for i in 0..2 {
        let j = 1 - i;
        let (ckpt, within) = &trained[i];
        p_cc[i][i] = within.p_cc;
        let c = cross_report(cfg, ckpt, within.clone(), &data[j])?;
        p_cc[i][j] = c.cross.p_cc;
        for w in &c.warnings {
            log(&format!("warning: {w}"));
        }
        c.write(&out.join(format!("train_{}", gens[i].name)), &format!("xeval_{}", gens[j].name))?;
        cross.push(c);
    }
    let summary = ReproSummary {
        datasets: [gens[0].name.clone(), gens[1].name.clone()],
        p_cc,
        cross,
    };
    for (name, body) in [("summary.txt", summary.table()), ("summary.csv", summary.csv())] {
        let p = out.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    Ok(summary)
}
