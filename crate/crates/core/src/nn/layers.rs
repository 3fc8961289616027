use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{gemm, Param, Parameterized, Scalar, Strides, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

fn he_normal<T: Scalar, R: Rng>(rng: &mut R, n: usize, fan_in: usize) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            T::from_f64_lossy(z * std)
        })
        .collect()
}

/// Stride-one, same-padded 1-D convolution. Weights are stored `[K][Cin][Cout]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub kernel: usize,
    pub cin: usize,
    pub cout: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng>(name: &str, kernel: usize, cin: usize, cout: usize, rng: &mut R) -> Self {
        let n = kernel * cin * cout;
        Conv1d {
            kernel,
            cin,
            cout,
            weight: Param::new(format!("{name}.weight"), &[kernel, cin, cout], he_normal(rng, n, kernel * cin)),
            bias: Param::filled(format!("{name}.bias"), &[cout], T::zero()),
        }
    }

    pub fn pad_left(&self) -> usize {
        (self.kernel - 1) / 2
    }

    /// Input copied into a zero-padded `(L + K − 1) × Cin` buffer.
    pub fn pad_input(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        if x.ch != self.cin {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {}",
                self.cin, x.ch
            )));
        }
        let left = self.pad_left() * self.cin;
        let mut xp = vec![T::zero(); (x.len + self.kernel - 1) * self.cin];
        xp[left..left + x.data.len()].copy_from_slice(&x.data);
        Ok(xp)
    }

    /// Forward pass over an already padded input of `len` output rows.
    pub fn forward_padded(&self, xp: &[T], len: usize) -> Tensor<T> {
        let mut y = Tensor::zeros(len, self.cout);
        for row in y.data.chunks_exact_mut(self.cout) {
            row.copy_from_slice(&self.bias.value);
        }
        // row t of the im2col matrix is xp[t·Cin .. (t+K)·Cin], so the
        // padded buffer itself is the left operand with row stride Cin
        gemm(
            len,
            self.kernel * self.cin,
            self.cout,
            xp,
            Strides { row: self.cin, col: 1 },
            &self.weight.value,
            Strides::row_major(self.cout),
            &mut y.data,
            Strides::row_major(self.cout),
            true,
        );
        y
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let xp = self.pad_input(x)?;
        Ok(self.forward_padded(&xp, x.len))
    }

    /// Accumulates weight and bias gradients into `dw`/`db` and optionally
    /// returns the input gradient.
    pub fn backward(&self, xp: &[T], dy: &Tensor<T>, dw: &mut [T], db: &mut [T], want_dx: bool) -> Option<Tensor<T>> {
        let (k, cin, cout, len) = (self.kernel, self.cin, self.cout, dy.len);
        gemm(
            k * cin,
            len,
            cout,
            xp,
            Strides { row: 1, col: cin },
            &dy.data,
            Strides::row_major(cout),
            dw,
            Strides::row_major(cout),
            true,
        );
        for row in dy.data.chunks_exact(cout) {
            for (b, g) in db.iter_mut().zip(row) {
                *b = *b + *g;
            }
        }
        if !want_dx {
            return None;
        }
        // dx is a correlation of dy (padded K−1−left / left) with the
        // kernel flipped in time and transposed in channels
        let left = self.pad_left();
        let lead = k - 1 - left;
        let mut dyp = vec![T::zero(); (len + k - 1) * cout];
        dyp[lead * cout..lead * cout + dy.data.len()].copy_from_slice(&dy.data);
        let mut wf = vec![T::zero(); k * cout * cin];
        for j in 0..k {
            let src = &self.weight.value[(k - 1 - j) * cin * cout..(k - j) * cin * cout];
            for c in 0..cin {
                for o in 0..cout {
                    wf[(j * cout + o) * cin + c] = src[c * cout + o];
                }
            }
        }
        let mut dx = Tensor::zeros(len, cin);
        gemm(
            len,
            k * cout,
            cin,
            &dyp,
            Strides { row: cout, col: 1 },
            &wf,
            Strides::row_major(cin),
            &mut dx.data,
            Strides::row_major(cin),
            false,
        );
        Some(dx)
    }
}

/// Per-channel batch normalization over batch × length.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d<T> {
    pub ch: usize,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: f64,
    pub eps: f64,
}

/// What the backward pass needs from a training-mode forward.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<Tensor<T>>,
    pub inv_std: Vec<f64>,
}

impl<T: Scalar> BatchNorm1d<T> {
    pub fn new(name: &str, ch: usize) -> Self {
        BatchNorm1d {
            ch,
            gamma: Param::filled(format!("{name}.gamma"), &[ch], T::one()),
            beta: Param::filled(format!("{name}.beta"), &[ch], T::zero()),
            running_mean: vec![T::zero(); ch],
            running_var: vec![T::one(); ch],
            momentum: 0.9,
            eps: 1e-5,
        }
    }

    fn check(&self, z: &Tensor<T>) -> Result<()> {
        if z.ch != self.ch {
            return Err(Error::shape(format!("batch norm expects {} channels, got {}", self.ch, z.ch)));
        }
        Ok(())
    }

    /// Normalizes with batch statistics, updates the running averages and
    /// returns `(outputs, cache)`.
    pub fn forward_train(&mut self, zs: &[Tensor<T>]) -> Result<(Vec<Tensor<T>>, BnCache<T>)> {
        let cache = self.normalize_train(zs.to_vec())?;
        let ys = cache
            .xhat
            .par_iter()
            .map(|xh| affine(xh, &self.gamma.value, &self.beta.value))
            .collect();
        Ok((ys, cache))
    }

    /// Turns the pre-activations into `x̂` in place (no scale or shift) and
    /// updates the running averages.
    pub fn normalize_train(&mut self, mut zs: Vec<Tensor<T>>) -> Result<BnCache<T>> {
        if zs.len() < 2 {
            return Err(Error::invalid("batch norm needs at least two samples in training mode"));
        }
        for z in &zs {
            self.check(z)?;
        }
        let ch = self.ch;
        let count: usize = zs.iter().map(|z| z.len).sum();
        let channel_sums = |z: &Tensor<T>, centre: &[f64]| {
            let mut s = vec![0.0; ch];
            let mut s2 = vec![0.0; ch];
            for row in z.data.chunks_exact(ch) {
                for c in 0..ch {
                    let d = row[c].as_f64() - centre[c];
                    s[c] += d;
                    s2[c] += d * d;
                }
            }
            (s, s2)
        };
        // shifted single pass around the first sample's first row keeps the
        // sums well conditioned
        let centre: Vec<f64> = zs[0].data[..ch].iter().map(|v| v.as_f64()).collect();
        let parts: Vec<(Vec<f64>, Vec<f64>)> = zs.par_iter().map(|z| channel_sums(z, &centre)).collect();
        let mut s = vec![0.0; ch];
        let mut s2 = vec![0.0; ch];
        for (a, b) in &parts {
            for c in 0..ch {
                s[c] += a[c];
                s2[c] += b[c];
            }
        }
        let n = count as f64;
        let mean: Vec<f64> = (0..ch).map(|c| centre[c] + s[c] / n).collect();
        let var: Vec<f64> = (0..ch).map(|c| (s2[c] / n - (s[c] / n).powi(2)).max(0.0)).collect();
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        let unbias = n / (n - 1.0);
        for c in 0..ch {
            let rm = self.momentum * self.running_mean[c].as_f64() + (1.0 - self.momentum) * mean[c];
            let rv = self.momentum * self.running_var[c].as_f64() + (1.0 - self.momentum) * var[c] * unbias;
            self.running_mean[c] = T::from_f64_lossy(rm);
            self.running_var[c] = T::from_f64_lossy(rv);
        }

        let scale: Vec<T> = inv_std.iter().map(|v| T::from_f64_lossy(*v)).collect();
        let shift: Vec<T> = (0..ch).map(|c| T::from_f64_lossy(-mean[c] * inv_std[c])).collect();
        zs.par_iter_mut().for_each(|z| {
            for row in z.data.chunks_exact_mut(ch) {
                for c in 0..ch {
                    row[c] = row[c] * scale[c] + shift[c];
                }
            }
        });
        Ok(BnCache { xhat: zs, inv_std })
    }

    /// Per-channel `(scale, shift)` that inference mode applies to its input.
    pub fn infer_affine(&self) -> (Vec<T>, Vec<T>) {
        (0..self.ch)
            .map(|c| {
                let s = self.gamma.value[c].as_f64() / (self.running_var[c].as_f64() + self.eps).sqrt();
                let b = self.beta.value[c].as_f64() - self.running_mean[c].as_f64() * s;
                (T::from_f64_lossy(s), T::from_f64_lossy(b))
            })
            .unzip()
    }

    pub fn forward_infer(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(z)?;
        let (scale, shift) = self.infer_affine();
        Ok(affine(z, &scale, &shift))
    }

    pub fn forward(&mut self, zs: &[Tensor<T>], mode: Mode) -> Result<Vec<Tensor<T>>> {
        match mode {
            Mode::Train => Ok(self.forward_train(zs)?.0),
            Mode::Infer => zs.iter().map(|z| self.forward_infer(z)).collect(),
        }
    }

    /// Accumulates `dγ`, `dβ` and returns the input gradients.
    pub fn backward(&mut self, cache: &BnCache<T>, dys: &[Tensor<T>]) -> Vec<Tensor<T>> {
        let ch = self.ch;
        let count: usize = dys.iter().map(|d| d.len).sum();
        let partial: Vec<(Vec<f64>, Vec<f64>)> = dys
            .par_iter()
            .zip(&cache.xhat)
            .map(|(dy, xh)| {
                let mut sg = vec![0.0; ch];
                let mut sgx = vec![0.0; ch];
                for (gr, xr) in dy.data.chunks_exact(ch).zip(xh.data.chunks_exact(ch)) {
                    for c in 0..ch {
                        let g = gr[c].as_f64();
                        sg[c] += g;
                        sgx[c] += g * xr[c].as_f64();
                    }
                }
                (sg, sgx)
            })
            .collect();
        let mut dbeta = vec![0.0; ch];
        let mut dgamma = vec![0.0; ch];
        for (sg, sgx) in &partial {
            for c in 0..ch {
                dbeta[c] += sg[c];
                dgamma[c] += sgx[c];
            }
        }
        for c in 0..ch {
            self.gamma.grad[c] = self.gamma.grad[c] + T::from_f64_lossy(dgamma[c]);
            self.beta.grad[c] = self.beta.grad[c] + T::from_f64_lossy(dbeta[c]);
        }
        let n = count as f64;
        let coef: Vec<f64> = (0..ch)
            .map(|c| self.gamma.value[c].as_f64() * cache.inv_std[c])
            .collect();
        dys.par_iter()
            .zip(&cache.xhat)
            .map(|(dy, xh)| {
                let mut dz = Tensor::zeros(dy.len, ch);
                for ((dr, gr), xr) in dz
                    .data
                    .chunks_exact_mut(ch)
                    .zip(dy.data.chunks_exact(ch))
                    .zip(xh.data.chunks_exact(ch))
                {
                    for c in 0..ch {
                        let v = coef[c]
                            * (gr[c].as_f64() - dbeta[c] / n - xr[c].as_f64() * dgamma[c] / n);
                        dr[c] = T::from_f64_lossy(v);
                    }
                }
                dz
            })
            .collect()
    }
}

fn affine<T: Scalar>(x: &Tensor<T>, scale: &[T], shift: &[T]) -> Tensor<T> {
    let mut y = x.clone();
    for row in y.data.chunks_exact_mut(x.ch) {
        for ((v, s), b) in row.iter_mut().zip(scale).zip(shift) {
            *v = *v * *s + *b;
        }
    }
    y
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    Tensor {
        len: x.len,
        ch: x.ch,
        data: x.data.iter().map(|v| v.max(T::zero())).collect(),
    }
}

/// Window 2, stride 2 along the length axis.
pub fn max_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.len % 2 != 0 {
        return Err(Error::shape(format!("max pool needs an even length, got {}", x.len)));
    }
    let ch = x.ch;
    let mut y = Tensor::zeros(x.len / 2, ch);
    for (t, out) in y.data.chunks_exact_mut(ch).enumerate() {
        let (a, b) = (x.row(2 * t), x.row(2 * t + 1));
        for c in 0..ch {
            out[c] = if b[c] > a[c] { b[c] } else { a[c] };
        }
    }
    Ok(y)
}

/// Channel means over the full length.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let mut acc = vec![0.0f64; x.ch];
    for row in x.data.chunks_exact(x.ch) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v.as_f64();
        }
    }
    acc.iter().map(|a| T::from_f64_lossy(a / x.len as f64)).collect()
}

/// Affine layer `y = x·W + b` with `W` stored `[in][out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inp: usize,
    pub out: usize,
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng>(name: &str, inp: usize, out: usize, rng: &mut R) -> Self {
        Dense {
            inp,
            out,
            weight: Param::new(format!("{name}.weight"), &[inp, out], he_normal(rng, inp * out, inp)),
            bias: Param::filled(format!("{name}.bias"), &[out], T::zero()),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.inp {
            return Err(Error::shape(format!("dense layer expects {} inputs, got {}", self.inp, x.len())));
        }
        let mut y = self.bias.value.clone();
        for (i, xi) in x.iter().enumerate() {
            let w = &self.weight.value[i * self.out..(i + 1) * self.out];
            for (yo, wo) in y.iter_mut().zip(w) {
                *yo = *yo + *xi * *wo;
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, x: &[T], dy: &[T]) -> Vec<T> {
        for (i, xi) in x.iter().enumerate() {
            let g = &mut self.weight.grad[i * self.out..(i + 1) * self.out];
            for (go, d) in g.iter_mut().zip(dy) {
                *go = *go + *xi * *d;
            }
        }
        self.bias.add_grad(dy);
        (0..self.inp)
            .map(|i| {
                let w = &self.weight.value[i * self.out..(i + 1) * self.out];
                w.iter().zip(dy).fold(T::zero(), |a, (w, d)| a + *w * *d)
            })
            .collect()
    }
}

/// Probabilities from logits via a max-shifted exponent.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<f64> {
    let mx = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v.as_f64() - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Cross-entropy of `label` under `softmax(logits)`, returning
/// `(loss, probabilities, dL/dlogits)`.
pub fn softmax_xent<T: Scalar>(logits: &[T], label: usize) -> Result<(f64, Vec<f64>, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!("label {label} out of range for {} classes", logits.len())));
    }
    let mx = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + logits.iter().map(|v| (v.as_f64() - mx).exp()).sum::<f64>().ln();
    let loss = lse - logits[label].as_f64();
    let p = softmax(logits);
    let grad = p
        .iter()
        .enumerate()
        .map(|(k, pk)| T::from_f64_lossy(pk - if k == label { 1.0 } else { 0.0 }))
        .collect();
    Ok((loss, p, grad))
}

macro_rules! params {
    ($ty:ident, $($field:ident),+) => {
        impl<T: Scalar> Parameterized<T> for $ty<T> {
            fn visit_params(&self, f: &mut dyn FnMut(&Param<T>)) {
                $(f(&self.$field);)+
            }

            fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
                $(f(&mut self.$field);)+
            }
        }
    };
}

params!(Conv1d, weight, bias);
params!(BatchNorm1d, gamma, beta);
params!(Dense, weight, bias);

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(len: usize, ch: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_vec(len, ch, (0..len * ch).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn naive_conv(x: &Tensor<f64>, conv: &Conv1d<f64>) -> Tensor<f64> {
        let left = conv.pad_left() as isize;
        let mut y = Tensor::zeros(x.len, conv.cout);
        for t in 0..x.len as isize {
            for o in 0..conv.cout {
                let mut acc = conv.bias.value[o];
                for j in 0..conv.kernel as isize {
                    let s = t + j - left;
                    if s < 0 || s >= x.len as isize {
                        continue;
                    }
                    for c in 0..conv.cin {
                        acc += x.at(s as usize, c) * conv.weight.value[(j as usize * conv.cin + c) * conv.cout + o];
                    }
                }
                y.data[t as usize * conv.cout + o] = acc;
            }
        }
        y
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv1d::<f64>::new("c", 23, 1, 1, &mut rng);
        conv.weight.value.iter_mut().for_each(|w| *w = 0.0);
        conv.weight.value[11] = 1.0;
        let x = rand_tensor(40, 1, 1);
        assert_eq!(conv.forward(&x).unwrap(), x);
    }

    #[test]
    fn conv_ones_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv1d::<f64>::new("c", 3, 1, 1, &mut rng);
        conv.weight.value = vec![1.0; 3];
        let y = conv.forward(&Tensor::from_vec(8, 1, vec![1.0; 8]).unwrap()).unwrap();
        assert_eq!(y.data, vec![2.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 2.0]);
    }

    #[test]
    fn conv_matches_nested_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(k, cin, cout, len) in &[(23usize, 2usize, 16usize, 64usize), (5, 3, 4, 9), (4, 2, 3, 10)] {
            let mut conv = Conv1d::<f64>::new("c", k, cin, cout, &mut rng);
            conv.bias.value.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
            let x = rand_tensor(len, cin, 3);
            let (a, b) = (conv.forward(&x).unwrap(), naive_conv(&x, &conv));
            for (p, q) in a.data.iter().zip(&b.data) {
                assert!((p - q).abs() < 1e-6);
            }
        }
        let conv = Conv1d::<f64>::new("c", 3, 2, 2, &mut rng);
        assert!(conv.forward(&rand_tensor(8, 3, 0)).is_err());
    }

    #[test]
    fn conv_single_precision_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let conv = Conv1d::<f64>::new("c", 23, 16, 24, &mut rng);
        let conv32 = Conv1d::<f32> {
            kernel: 23,
            cin: 16,
            cout: 24,
            weight: Param::new("w", &[23, 16, 24], conv.weight.value.iter().map(|v| *v as f32).collect()),
            bias: Param::filled("b", &[24], 0.0f32),
        };
        let x = rand_tensor(256, 16, 5);
        let (a, b) = (conv.forward(&x).unwrap(), conv32.forward(&x.cast()).unwrap());
        for (p, q) in a.data.iter().zip(&b.data) {
            assert!((p - *q as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn batch_norm_train_statistics() {
        let mut bn = BatchNorm1d::<f64>::new("bn", 3);
        let zs: Vec<Tensor<f64>> = (0..4)
            .map(|s| {
                let mut t = rand_tensor(50, 3, s);
                t.data.iter_mut().enumerate().for_each(|(i, v)| *v = *v * 3.0 + (i % 3) as f64);
                t
            })
            .collect();
        let ys = bn.forward(&zs, Mode::Train).unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = ys.iter().flat_map(|y| (0..y.len).map(move |t| y.at(t, c))).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-5);
            assert!((v - 1.0).abs() < 1e-3);
        }
        assert!(bn.running_var.iter().all(|v| *v >= 0.0));
        assert!(bn.forward_train(&zs[..1]).is_err());
    }

    #[test]
    fn batch_norm_train_matches_infer_with_batch_stats() {
        let zs: Vec<Tensor<f64>> = (0..3).map(|s| rand_tensor(30, 2, 10 + s)).collect();
        let mut bn = BatchNorm1d::<f64>::new("bn", 2);
        bn.momentum = 0.0;
        let train = bn.forward(&zs, Mode::Train).unwrap();
        // running variance is stored unbiased; undo that for the comparison
        let n = 90.0;
        bn.running_var.iter_mut().for_each(|v| *v *= (n - 1.0) / n);
        let infer = bn.forward(&zs, Mode::Infer).unwrap();
        for (a, b) in train.iter().zip(&infer) {
            for (p, q) in a.data.iter().zip(&b.data) {
                assert!((p - q).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn pools_and_relu() {
        let r = relu(&Tensor::from_vec(2, 1, vec![-1.0f64, 2.0]).unwrap());
        assert_eq!(r.data, vec![0.0, 2.0]);
        let p = max_pool(&Tensor::from_vec(4, 1, vec![1.0f64, 3.0, 2.0, 0.0]).unwrap()).unwrap();
        assert_eq!(p.data, vec![3.0, 2.0]);
        assert!(max_pool(&Tensor::<f64>::zeros(3, 1)).is_err());
        let x = rand_tensor(1024, 64, 7);
        let g = global_avg_pool(&x);
        assert_eq!(g.len(), 64);
        let want: f64 = (0..1024).map(|t| x.at(t, 5)).sum::<f64>() / 1024.0;
        assert!((g[5] - want).abs() < 1e-12);
    }

    #[test]
    fn dense_identity_and_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut d = Dense::<f64>::new("fc", 4, 4, &mut rng);
        d.weight.value = (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect();
        assert_eq!(d.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![1.0, -2.0, 3.0, 0.5]);
        let d = Dense::<f64>::new("fc", 6, 3, &mut rng);
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.3 - 1.0).collect();
        let y = d.forward(&x).unwrap();
        for (o, yo) in y.iter().enumerate() {
            let want: f64 = (0..6).map(|i| x[i] * d.weight.value[i * 3 + o]).sum();
            assert!((yo - want).abs() < 1e-6);
        }
        assert!(d.forward(&x[..5]).is_err());
    }

    #[test]
    fn softmax_xent_basics() {
        let (loss, p, g) = softmax_xent(&[0.0f64; 8], 3).unwrap();
        assert!((loss - 8f64.ln()).abs() < 1e-12);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((g[3] + 0.875).abs() < 1e-12);
        let (_, p, _) = softmax_xent(&[1000.0f64, -1000.0, 0.0], 0).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(softmax_xent(&[0.0f64; 2], 2).is_err());
    }
}
