//! The multi-branch "capsule" classifier.
//!
//! Each branch reads one feature kind and runs a ladder of conv blocks
//! (max-pooled except the last, which is globally averaged) followed by a
//! dense layer to `classes` outputs. Branch outputs are concatenated and a
//! final dense layer produces the class logits.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureScaling, FeatureSet};
use crate::nn::{softmax, softmax_xent, BlockCache, ConvBlock, Dense, Param, Parameterized, PoolKind, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapConfig {
    pub frame_length: usize,
    pub classes: usize,
    /// Filters per conv block; all but the last are max-pooled.
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub branches: Vec<FeatureKind>,
}

impl Default for CapConfig {
    fn default() -> Self {
        CapConfig {
            frame_length: 32_768,
            classes: 8,
            filters: vec![16, 24, 32, 48, 64, 96],
            kernel: 23,
            branches: FeatureKind::ALL.to_vec(),
        }
    }
}

impl CapConfig {
    pub fn reference(frame_length: usize, classes: usize) -> Self {
        CapConfig {
            frame_length,
            classes,
            ..CapConfig::default()
        }
    }

    pub fn halvings(&self) -> usize {
        self.filters.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters.is_empty() || self.filters.contains(&0) {
            return Err(Error::Config("filter ladder must be non-empty and positive".into()));
        }
        if self.kernel == 0 {
            return Err(Error::Config("kernel length must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least two classes, got {}", self.classes)));
        }
        if self.branches.is_empty() {
            return Err(Error::Config("at least one branch is required".into()));
        }
        for (i, k) in self.branches.iter().enumerate() {
            if self.branches[..i].contains(k) {
                return Err(Error::Config(format!("branch {k} listed twice")));
            }
        }
        if !self.frame_length.is_power_of_two() {
            return Err(Error::Config(format!("frame length {} is not a power of two", self.frame_length)));
        }
        if self.frame_length >> self.halvings() < 2 {
            return Err(Error::Config(format!(
                "frame length {} is too short for {} halvings",
                self.frame_length,
                self.halvings()
            )));
        }
        Ok(())
    }

    /// Activation shape after each stage of a branch, starting with the input.
    pub fn branch_shapes(&self, kind: FeatureKind) -> Vec<(usize, usize)> {
        let mut out = vec![(self.frame_length, kind.channels())];
        let mut len = self.frame_length;
        for (i, f) in self.filters.iter().enumerate() {
            if i + 1 < self.filters.len() {
                len /= 2;
                out.push((len, *f));
            } else {
                out.push((1, *f));
            }
        }
        out.push((1, self.classes));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    pub kind: FeatureKind,
    pub blocks: Vec<ConvBlock<T>>,
    pub fc: Dense<T>,
}

impl<T: Scalar> Parameterized<T> for Branch<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        for b in &self.blocks {
            b.visit_params(f);
        }
        f(&self.fc.weight);
        f(&self.fc.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for b in &mut self.blocks {
            b.visit_params_mut(f);
        }
        f(&mut self.fc.weight);
        f(&mut self.fc.bias);
    }
}

/// One frame's branch inputs, each tagged with its feature kind.
pub type SampleInput<T> = Vec<(FeatureKind, Tensor<T>)>;

#[derive(Debug, Clone, PartialEq)]
pub struct CapNetwork<T> {
    pub config: CapConfig,
    pub branches: Vec<Branch<T>>,
    pub head: Dense<T>,
}

/// Everything a training-mode forward pass hands to the backward pass.
pub struct ForwardCache<T> {
    blocks: Vec<Vec<BlockCache<T>>>,
    pooled: Vec<Vec<Vec<T>>>,
    concat: Vec<Vec<T>>,
}

/// Builds the network with He-normal weights drawn from `seed`.
pub fn build_cap<T: Scalar>(config: &CapConfig, seed: u64) -> Result<CapNetwork<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.filters.len();
    let branches = config
        .branches
        .iter()
        .map(|&kind| {
            let mut cin = kind.channels();
            let blocks = config
                .filters
                .iter()
                .enumerate()
                .map(|(i, &f)| {
                    let pool = if i + 1 < n { PoolKind::Max } else { PoolKind::GlobalAvg };
                    let b = ConvBlock::new(&format!("{kind}.block{}", i + 1), config.kernel, cin, f, pool, &mut rng);
                    cin = f;
                    b
                })
                .collect();
            let fc = Dense::new(&format!("{kind}.fc"), cin, config.classes, &mut rng);
            Branch { kind, blocks, fc }
        })
        .collect::<Vec<_>>();
    let head = Dense::new("head", config.branches.len() * config.classes, config.classes, &mut rng);
    Ok(CapNetwork {
        config: config.clone(),
        branches,
        head,
    })
}

/// Scales a frame's features and converts them to network inputs.
pub fn sample_input<T: Scalar>(fs: &FeatureSet, scaling: &FeatureScaling, kinds: &[FeatureKind]) -> SampleInput<T> {
    kinds
        .iter()
        .map(|&k| {
            let t = fs.get(k);
            let data = scaling.apply(t).into_iter().map(|v| T::from_f64_lossy(v as f64)).collect();
            (k, Tensor { len: t.length, ch: t.channels(), data })
        })
        .collect()
}

impl<T: Scalar> Parameterized<T> for CapNetwork<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        for b in &self.branches {
            b.visit_params(f);
        }
        f(&self.head.weight);
        f(&self.head.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        for b in &mut self.branches {
            b.visit_params_mut(f);
        }
        f(&mut self.head.weight);
        f(&mut self.head.bias);
    }
}

impl<T: Scalar> CapNetwork<T> {
    pub fn classes(&self) -> usize {
        self.config.classes
    }

    fn check_input(&self, input: &SampleInput<T>) -> Result<()> {
        if input.len() != self.branches.len() {
            return Err(Error::shape(format!(
                "{} branch inputs for {} branches",
                input.len(),
                self.branches.len()
            )));
        }
        for (b, (kind, t)) in self.branches.iter().zip(input) {
            if b.kind != *kind {
                return Err(Error::shape(format!("branch {} was given a {kind} feature", b.kind)));
            }
            if t.len != self.config.frame_length || t.ch != kind.channels() {
                return Err(Error::shape(format!(
                    "{kind} input is {}×{}, expected {}×{}",
                    t.len,
                    t.ch,
                    self.config.frame_length,
                    kind.channels()
                )));
            }
        }
        Ok(())
    }

    /// Inference-mode logits for one frame.
    pub fn logits(&self, input: &SampleInput<T>) -> Result<Vec<T>> {
        self.check_input(input)?;
        let mut concat = Vec::with_capacity(self.head.inp);
        for (b, (_, x)) in self.branches.iter().zip(input) {
            let mut h = x.clone();
            for blk in &b.blocks {
                h = blk.forward_infer(&h)?;
            }
            concat.extend(b.fc.forward(&h.data)?);
        }
        self.head.forward(&concat)
    }

    /// Class probabilities for one frame.
    pub fn forward(&self, input: &SampleInput<T>) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(input)?))
    }

    /// Probabilities for many frames, in input order.
    pub fn predict(&self, inputs: &[SampleInput<T>]) -> Result<Vec<Vec<f64>>> {
        inputs.par_iter().map(|x| self.forward(x)).collect()
    }

    /// Training-mode forward (batch statistics, running averages updated).
    pub fn forward_train(&mut self, batch: &[SampleInput<T>]) -> Result<(Vec<Vec<T>>, ForwardCache<T>)> {
        for x in batch {
            self.check_input(x)?;
        }
        let nb = self.branches.len();
        let mut caches = Vec::with_capacity(nb);
        let mut pooled = Vec::with_capacity(nb);
        let mut concat: Vec<Vec<T>> = vec![Vec::with_capacity(self.head.inp); batch.len()];
        for (bi, branch) in self.branches.iter_mut().enumerate() {
            let mut hs: Vec<Tensor<T>> = batch.iter().map(|x| x[bi].1.clone()).collect();
            let mut bc = Vec::with_capacity(branch.blocks.len());
            for blk in &mut branch.blocks {
                let (next, cache) = blk.forward_train(&hs)?;
                bc.push(cache);
                hs = next;
            }
            let p: Vec<Vec<T>> = hs.into_iter().map(|h| h.data).collect();
            for (c, v) in concat.iter_mut().zip(&p) {
                c.extend(branch.fc.forward(v)?);
            }
            caches.push(bc);
            pooled.push(p);
        }
        let logits = concat.iter().map(|c| self.head.forward(c)).collect::<Result<Vec<_>>>()?;
        Ok((
            logits,
            ForwardCache {
                blocks: caches,
                pooled,
                concat,
            },
        ))
    }

    /// Accumulates parameter gradients given `dL/dlogits` per sample.
    pub fn backward(&mut self, cache: ForwardCache<T>, dlogits: &[Vec<T>]) {
        let ForwardCache { blocks, pooled, concat } = cache;
        let classes = self.config.classes;
        let dconcat: Vec<Vec<T>> = concat.iter().zip(dlogits).map(|(c, d)| self.head.backward(c, d)).collect();
        for (bi, (branch, (bcache, p))) in self.branches.iter_mut().zip(blocks.into_iter().zip(pooled)).enumerate() {
            let ch = branch.fc.inp;
            let mut ds: Vec<Tensor<T>> = p
                .iter()
                .zip(&dconcat)
                .map(|(x, dc)| Tensor {
                    len: 1,
                    ch,
                    data: branch.fc.backward(x, &dc[bi * classes..(bi + 1) * classes]),
                })
                .collect();
            for (i, (blk, c)) in branch.blocks.iter_mut().zip(bcache).enumerate().rev() {
                ds = blk.backward(c, &ds, i > 0);
            }
        }
    }

    /// Mean cross-entropy over a batch in training mode, with gradients
    /// accumulated into the parameters. Returns `(loss, correct)`.
    pub fn train_batch(&mut self, batch: &[SampleInput<T>], labels: &[usize]) -> Result<(f64, usize)> {
        if batch.len() != labels.len() {
            return Err(Error::shape("one label per sample is required"));
        }
        let (logits, cache) = self.forward_train(batch)?;
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let mut correct = 0;
        let mut dlogits = Vec::with_capacity(batch.len());
        for (l, &y) in logits.iter().zip(labels) {
            let (li, p, g) = softmax_xent(l, y)?;
            loss += li;
            if argmax(&p) == y {
                correct += 1;
            }
            dlogits.push(g.into_iter().map(|v| v * T::from_f64_lossy(scale)).collect());
        }
        self.backward(cache, &dlogits);
        Ok((loss * scale, correct))
    }

    /// Training-mode loss without gradients.
    pub fn train_loss(&mut self, batch: &[SampleInput<T>], labels: &[usize]) -> Result<f64> {
        let (logits, _) = self.forward_train(batch)?;
        let mut loss = 0.0;
        for (l, &y) in logits.iter().zip(labels) {
            loss += softmax_xent(l, y)?.0;
        }
        Ok(loss / batch.len() as f64)
    }

    pub fn branch_parameter_counts(&self) -> Vec<(FeatureKind, usize)> {
        self.branches.iter().map(|b| (b.kind, b.parameter_count())).collect()
    }

    /// Zeroes the head weights fed by every branch other than `keep`.
    pub fn isolate_branch(&mut self, keep: usize) {
        let c = self.config.classes;
        for (i, w) in self.head.weight.value.chunks_exact_mut(c).enumerate() {
            if i / c != keep {
                w.iter_mut().for_each(|v| *v = T::zero());
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit_params(&mut |p| ok &= p.value.iter().all(|v| v.is_finite()));
        ok
    }
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn shape_text(len: usize, ch: usize, collapse: bool) -> String {
    if collapse {
        thousands(ch)
    } else {
        format!("{} × {}", thousands(len), thousands(ch))
    }
}

/// Layer table in the style of the branch-layout table, one block per branch.
pub fn topology_table(config: &CapConfig) -> Result<String> {
    config.validate()?;
    let mut s = String::new();
    let nb = config.branches.len();
    let _ = writeln!(
        s,
        "CAP topology: frame length {}, {} classes, kernel {}, {} branches",
        thousands(config.frame_length),
        config.classes,
        config.kernel,
        nb
    );
    let mut total = 0usize;
    for &kind in &config.branches {
        let shapes = config.branch_shapes(kind);
        let _ = writeln!(s);
        let _ = writeln!(s, "Branch {kind} (Y = {})", kind.channels());
        let _ = writeln!(s, "  {:<12} {:<24} {:<16} {:>10}", "Layer", "(# Filters)[Filter Size]", "Activations", "Params");
        let _ = writeln!(s, "  {:<12} {:<24} {:<16}", "Input", "", shape_text(shapes[0].0, shapes[0].1, false));
        let mut branch_total = 0;
        let mut cin = kind.channels();
        for (i, f) in config.filters.iter().enumerate() {
            let last = i + 1 == config.filters.len();
            let params = config.kernel * cin * f + 3 * f;
            branch_total += params;
            let (len, ch) = shapes[i + 1];
            let _ = writeln!(
                s,
                "  {:<12} {:<24} {:<16} {:>10}",
                if last { "ConvAvgPool" } else { "ConvMaxPool" },
                format!("({f})[{} × {cin}]", config.kernel),
                shape_text(len, ch, last),
                thousands(params)
            );
            cin = *f;
        }
        let fc = cin * config.classes + config.classes;
        branch_total += fc;
        let _ = writeln!(s, "  {:<12} {:<24} {:<16} {:>10}", "FC", "", config.classes, thousands(fc));
        let _ = writeln!(s, "  {:<12} {:<24} {:<16} {:>10}", "Total", "", "", thousands(branch_total));
        total += branch_total;
    }
    let head = nb * config.classes * config.classes + config.classes;
    total += head;
    let _ = writeln!(s);
    let _ = writeln!(s, "Head");
    let _ = writeln!(s, "  {:<12} {:<24} {:<16}", "Concat", "", nb * config.classes);
    let _ = writeln!(s, "  {:<12} {:<24} {:<16} {:>10}", "FC", "", config.classes, thousands(head));
    let _ = writeln!(s);
    let _ = writeln!(s, "Learnable parameters: {}", thousands(total));
    Ok(s.lines().map(|l| format!("{}\n", l.trim_end())).collect())
}
