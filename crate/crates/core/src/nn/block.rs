//! Conv → batch norm → ReLU → pool, run over a whole batch at once.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm1d, BnCache, Conv1d};
use super::{Param, Parameterized, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolKind {
    /// Window 2, stride 2.
    Max,
    /// Mean over the whole remaining length.
    GlobalAvg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T> {
    pub conv: Conv1d<T>,
    pub bn: BatchNorm1d<T>,
    pub pool: PoolKind,
}

/// Activations kept between the forward and backward pass of one batch.
pub struct BlockCache<T> {
    padded: Vec<Vec<T>>,
    bn: BnCache<T>,
}

impl<T: Scalar> ConvBlock<T> {
    pub fn new<R: Rng>(name: &str, kernel: usize, cin: usize, cout: usize, pool: PoolKind, rng: &mut R) -> Self {
        ConvBlock {
            conv: Conv1d::new(&format!("{name}.conv"), kernel, cin, cout, rng),
            bn: BatchNorm1d::new(&format!("{name}.bn"), cout),
            pool,
        }
    }

    pub fn out_len(&self, len: usize) -> usize {
        match self.pool {
            PoolKind::Max => len / 2,
            PoolKind::GlobalAvg => 1,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if self.pool == PoolKind::Max && len % 2 != 0 {
            return Err(Error::shape(format!("max pool needs an even length, got {len}")));
        }
        if len == 0 {
            return Err(Error::shape("empty input"));
        }
        Ok(())
    }

    /// ReLU and pool of `scale·x + shift` (per channel).
    fn pool_forward(&self, x: &Tensor<T>, scale: &[T], shift: &[T]) -> Tensor<T> {
        let ch = x.ch;
        let zero = T::zero();
        match self.pool {
            PoolKind::Max => {
                let mut y = Tensor::zeros(x.len / 2, ch);
                for (t, out) in y.data.chunks_exact_mut(ch).enumerate() {
                    let (a, b) = (x.row(2 * t), x.row(2 * t + 1));
                    for c in 0..ch {
                        let ua = a[c] * scale[c] + shift[c];
                        let ub = b[c] * scale[c] + shift[c];
                        out[c] = ua.max(ub).max(zero);
                    }
                }
                y
            }
            PoolKind::GlobalAvg => {
                let mut acc = vec![0.0f64; ch];
                for row in x.data.chunks_exact(ch) {
                    for c in 0..ch {
                        acc[c] += (row[c] * scale[c] + shift[c]).max(zero).as_f64();
                    }
                }
                let n = x.len as f64;
                Tensor {
                    len: 1,
                    ch,
                    data: acc.iter().map(|a| T::from_f64_lossy(a / n)).collect(),
                }
            }
        }
    }

    /// Gradient with respect to the batch-norm output, through ReLU and pool.
    fn pool_backward(&self, xhat: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
        let ch = xhat.ch;
        let (gamma, beta) = (&self.bn.gamma.value, &self.bn.beta.value);
        let u = |t: usize, c: usize| gamma[c] * xhat.data[t * ch + c] + beta[c];
        let zero = T::zero();
        let mut g = Tensor::zeros(xhat.len, ch);
        match self.pool {
            PoolKind::Max => {
                for t in 0..dy.len {
                    for c in 0..ch {
                        let (a, b) = (u(2 * t, c), u(2 * t + 1, c));
                        let (idx, v) = if b > a { (2 * t + 1, b) } else { (2 * t, a) };
                        if v > zero {
                            g.data[idx * ch + c] = dy.data[t * ch + c];
                        }
                    }
                }
            }
            PoolKind::GlobalAvg => {
                let inv = T::from_f64_lossy(1.0 / xhat.len as f64);
                for t in 0..xhat.len {
                    for c in 0..ch {
                        if u(t, c) > zero {
                            g.data[t * ch + c] = dy.data[c] * inv;
                        }
                    }
                }
            }
        }
        g
    }

    pub fn forward_train(&mut self, xs: &[Tensor<T>]) -> Result<(Vec<Tensor<T>>, BlockCache<T>)> {
        for x in xs {
            self.check_len(x.len)?;
        }
        let conv = &self.conv;
        let (padded, zs): (Vec<Vec<T>>, Vec<Tensor<T>>) = xs
            .par_iter()
            .map(|x| {
                let xp = conv.pad_input(x)?;
                let z = conv.forward_padded(&xp, x.len);
                Ok((xp, z))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let bn = self.bn.normalize_train(zs)?;
        let (gamma, beta) = (&self.bn.gamma.value, &self.bn.beta.value);
        let ys = bn.xhat.par_iter().map(|xh| self.pool_forward(xh, gamma, beta)).collect();
        Ok((ys, BlockCache { padded, bn }))
    }

    pub fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_len(x.len)?;
        let z = self.conv.forward(x)?;
        let (scale, shift) = self.bn.infer_affine();
        Ok(self.pool_forward(&z, &scale, &shift))
    }

    /// Accumulates parameter gradients; returns input gradients when asked.
    pub fn backward(&mut self, cache: BlockCache<T>, dys: &[Tensor<T>], want_dx: bool) -> Vec<Tensor<T>> {
        let BlockCache { padded, bn } = cache;
        let gs: Vec<Tensor<T>> = bn
            .xhat
            .par_iter()
            .zip(dys)
            .map(|(xh, dy)| self.pool_backward(xh, dy))
            .collect();
        let dzs = self.bn.backward(&bn, &gs);
        drop(gs);
        drop(bn);
        let conv = &self.conv;
        let (nw, nb) = (conv.weight.len(), conv.bias.len());
        let parts: Vec<(Vec<T>, Vec<T>, Option<Tensor<T>>)> = padded
            .par_iter()
            .zip(&dzs)
            .map(|(xp, dz)| {
                let mut dw = vec![T::zero(); nw];
                let mut db = vec![T::zero(); nb];
                let dx = conv.backward(xp, dz, &mut dw, &mut db, want_dx);
                (dw, db, dx)
            })
            .collect();
        let mut dxs = Vec::with_capacity(parts.len());
        for (dw, db, dx) in parts {
            self.conv.weight.add_grad(&dw);
            self.conv.bias.add_grad(&db);
            if let Some(dx) = dx {
                dxs.push(dx);
            }
        }
        dxs
    }
}

impl<T: Scalar> Parameterized<T> for ConvBlock<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
        f(&self.conv.weight);
        f(&self.conv.bias);
        f(&self.bn.gamma);
        f(&self.bn.beta);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.conv.weight);
        f(&mut self.conv.bias);
        f(&mut self.bn.gamma);
        f(&mut self.bn.beta);
    }
}
