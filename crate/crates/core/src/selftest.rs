//! Built-in numerical self-checks: feature layers against direct complex
//! powers, the FFT magnitude layer against a naive DFT, and analytic
//! gradients of every trainable layer against central differences.

use std::f64::consts::PI;
use std::fmt;

use num_complex::{Complex, Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cf::{cycle_frequencies, CFParams};
use crate::features::{extract_from_samples, fft_mag_layer, pow3_layer, square_layer, FeatureKind};
use crate::model::{build_cap, CapConfig, SampleInput};
use crate::nn::{
    grad_check, softmax_xent, BatchNorm1d, Conv1d, ConvBlock, Dense, GradCheckOptions, Param, Parameterized, PoolKind,
    Tensor,
};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:<32} {}", self.name, self.detail)
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Largest `|a − b| / max(|b|, floor)` over paired values.
fn max_rel(pairs: impl Iterator<Item = (Complex64, Complex64)>, floor: f64) -> f64 {
    pairs.fold(0.0, |m, (a, b)| m.max((a - b).norm() / b.norm().max(floor)))
}

fn random_samples(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
        .collect()
}

/// `square_layer`, `pow3_layer` and the composed x⁶, x⁸ paths against
/// `powi` on `n` random samples, in 64- and 32-bit arithmetic.
pub fn layer_oracles(n: usize) -> Vec<Check> {
    let x = random_samples(n, 11);
    let x2 = square_layer(&x);
    let x4 = square_layer(&x2);
    let x6 = pow3_layer(&x2);
    let x8 = square_layer(&x4);
    let paths: [(&str, i32, &[Complex64]); 5] = [
        ("square", 2, &x2),
        ("pow3", 3, &pow3_layer(&x)),
        ("x4", 4, &x4),
        ("x6", 6, &x6),
        ("x8", 8, &x8),
    ];
    let mut out = Vec::new();
    for (name, p, got) in paths {
        let err = max_rel(got.iter().zip(&x).map(|(g, v)| (*g, v.powi(p))), 1e-300);
        out.push(check(&format!("layer {name} (f64)"), err < 1e-10, format!("max rel err {err:.2e}")));
    }
    let xf: Vec<Complex32> = x.iter().map(|v| Complex::new(v.re as f32, v.im as f32)).collect();
    let x2f = square_layer(&xf);
    let x4f = square_layer(&x2f);
    let pathsf: [(&str, i32, Vec<Complex32>); 4] = [
        ("square", 2, x2f.clone()),
        ("pow3", 3, pow3_layer(&xf)),
        ("x6", 6, pow3_layer(&x2f)),
        ("x8", 8, square_layer(&x4f)),
    ];
    for (name, p, got) in pathsf {
        let err = max_rel(
            got.iter().zip(&xf).map(|(g, v)| {
                let v64 = Complex64::new(v.re as f64, v.im as f64);
                (Complex64::new(g.re as f64, g.im as f64), v64.powi(p))
            }),
            1e-30,
        );
        out.push(check(&format!("layer {name} (f32)"), err < 1e-5, format!("max rel err {err:.2e}")));
    }
    out
}

/// FFT-magnitude layer against an O(N²) DFT, and the shifted-index tone test.
pub fn dft_oracle(n: usize) -> Vec<Check> {
    let x = random_samples(n, 12);
    let got = fft_mag_layer(&x).expect("power-of-two length");
    let mut err = 0.0f64;
    for (i, g) in got.iter().enumerate() {
        let k = (i + n / 2) % n;
        let s: Complex64 = x
            .iter()
            .enumerate()
            .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((k * t) % n) as f64 / n as f64))
            .sum();
        err = err.max((g - s.norm()).abs() / s.norm().max(1e-12));
    }
    let mut out = vec![check("fft magnitude vs DFT", err < 1e-6, format!("N = {n}, max rel err {err:.2e}"))];
    let bin = 37usize;
    let tone: Vec<Complex64> = (0..n)
        .map(|t| Complex64::from_polar(1.0, 2.0 * PI * (bin * t) as f64 / n as f64))
        .collect();
    let mag = fft_mag_layer(&tone).expect("power-of-two length");
    let peak = crate::model::argmax(&mag);
    out.push(check(
        "fft shifted index",
        peak == n / 2 + bin,
        format!("tone at bin {bin} peaks at index {peak} (expect {})", n / 2 + bin),
    ));
    out
}

/// Cycle-frequency formula on hand-computed cases.
pub fn cycle_frequency_examples() -> Vec<Check> {
    let a = cycle_frequencies(&CFParams::new(4, 1, 0.01, 10.0)).unwrap_or_default();
    let ok_a = a.len() == 2 && (a[0] - 0.14).abs() < 1e-12 && (a[1] + 0.06).abs() < 1e-12;
    let b = cycle_frequencies(&CFParams::new(2, 0, 0.015, 10.0)).unwrap_or_default();
    let ok_b = b.len() == 1 && (b[0] - 0.03).abs() < 1e-12;
    vec![
        check("cycle frequencies n=4 k=1", ok_a, format!("{a:?}")),
        check("cycle frequencies n=2 k=0", ok_b, format!("{b:?}")),
    ]
}

fn rand_tensor(rng: &mut ChaCha8Rng, len: usize, ch: usize) -> Tensor<f64> {
    Tensor {
        len,
        ch,
        data: (0..len * ch).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const GRAD_TOL: f64 = 1e-4;

fn grad_entry(name: &str, report: crate::nn::GradCheckReport) -> Check {
    check(
        &format!("gradient {name}"),
        report.passed(GRAD_TOL),
        format!(
            "max rel err {:.2e} over {} entries (worst {}[{}])",
            report.max_rel_err, report.checked, report.worst_param, report.worst_index
        ),
    )
}

/// A trainable layer with a fixed batch and a fixed random read-out.
struct Probe<L> {
    layer: L,
    xs: Vec<Tensor<f64>>,
    proj: Vec<Vec<f64>>,
}

impl<L: Parameterized<f64>> Parameterized<f64> for Probe<L> {
    fn visit_params(&self, f: &mut dyn FnMut(&Param<f64>)) {
        self.layer.visit_params(f)
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param<f64>)) {
        self.layer.visit_params_mut(f)
    }
}

fn probe<L>(layer: L, rng: &mut ChaCha8Rng, batch: usize, (len, ch): (usize, usize), out: usize) -> Probe<L> {
    let xs = (0..batch).map(|_| rand_tensor(rng, len, ch)).collect();
    let proj = (0..batch).map(|_| rand_tensor(rng, out, 1).data).collect();
    Probe { layer, xs, proj }
}

fn as_tensors(proj: &[Vec<f64>], len: usize, ch: usize) -> Vec<Tensor<f64>> {
    proj.iter().map(|r| Tensor { len, ch, data: r.clone() }).collect()
}

/// Central-difference checks of every trainable layer, a full conv block
/// with each pooling kind and a small two-branch network.
pub fn gradient_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let opts = GradCheckOptions {
        max_per_param: 30,
        ..GradCheckOptions::default()
    };
    let mut out = Vec::new();

    let (k, cin, cout, len) = (5, 2, 3, 14);
    let mut conv = Conv1d::<f64>::new("conv", k, cin, cout, &mut rng);
    conv.bias.value = vec![0.1, -0.2, 0.3];
    let mut p = probe(conv, &mut rng, 1, (len, cin), len * cout);
    let r = grad_check(
        &mut p,
        &mut |p| dot(&p.layer.forward(&p.xs[0]).unwrap().data, &p.proj[0]),
        &mut |p| {
            let xp = p.layer.pad_input(&p.xs[0]).unwrap();
            let dy = &as_tensors(&p.proj, len, cout)[0];
            let (mut dw, mut db) = (vec![0.0; p.layer.weight.len()], vec![0.0; cout]);
            p.layer.backward(&xp, dy, &mut dw, &mut db, false);
            p.layer.weight.add_grad(&dw);
            p.layer.bias.add_grad(&db);
        },
        opts,
    );
    out.push(grad_entry("conv1d", r));

    let mut bn = BatchNorm1d::<f64>::new("bn", 3);
    bn.gamma.value = vec![0.5, 1.5, -0.8];
    bn.beta.value = vec![0.1, -0.2, 0.3];
    let mut p = probe(bn, &mut rng, 3, (9, 3), 27);
    let r = grad_check(
        &mut p,
        &mut |p| {
            let ys = p.layer.forward_train(&p.xs).unwrap().0;
            ys.iter().zip(&p.proj).map(|(y, r)| dot(&y.data, r)).sum()
        },
        &mut |p| {
            let (_, cache) = p.layer.forward_train(&p.xs).unwrap();
            p.layer.backward(&cache, &as_tensors(&p.proj, 9, 3));
        },
        opts,
    );
    out.push(grad_entry("batch norm", r));

    let dense = Dense::<f64>::new("fc", 6, 4, &mut rng);
    let mut p = probe(dense, &mut rng, 1, (1, 6), 0);
    let r = grad_check(
        &mut p,
        &mut |p| softmax_xent(&p.layer.forward(&p.xs[0].data).unwrap(), 2).unwrap().0,
        &mut |p| {
            let x = p.xs[0].data.clone();
            let g = softmax_xent(&p.layer.forward(&x).unwrap(), 2).unwrap().2;
            p.layer.backward(&x, &g);
        },
        opts,
    );
    out.push(grad_entry("dense + softmax xent", r));

    for pool in [PoolKind::Max, PoolKind::GlobalAvg] {
        let mut blk = ConvBlock::<f64>::new("blk", 5, 2, 3, pool, &mut rng);
        blk.bn.gamma.value = vec![0.7, 1.2, 0.9];
        blk.bn.beta.value = vec![0.2, -0.1, 0.05];
        let olen = blk.out_len(16);
        let mut p = probe(blk, &mut rng, 3, (16, 2), olen * 3);
        let r = grad_check(
            &mut p,
            &mut |p| {
                let ys = p.layer.forward_train(&p.xs).unwrap().0;
                ys.iter().zip(&p.proj).map(|(y, r)| dot(&y.data, r)).sum()
            },
            &mut |p| {
                let (_, cache) = p.layer.forward_train(&p.xs).unwrap();
                let dys = as_tensors(&p.proj, olen, 3);
                p.layer.backward(cache, &dys, false);
            },
            opts,
        );
        out.push(grad_entry(&format!("conv block ({pool:?} pool)"), r));
    }

    let cfg = CapConfig {
        frame_length: 16,
        classes: 3,
        filters: vec![3, 4],
        kernel: 3,
        branches: vec![FeatureKind::Time4, FeatureKind::Freq2],
    };
    let mut net = build_cap::<f64>(&cfg, 21).expect("valid topology");
    let batch: Vec<SampleInput<f64>> = (0..2)
        .map(|s| {
            let x = random_samples(16, 100 + s);
            let fs = extract_from_samples(&x).expect("power-of-two length");
            cfg.branches
                .iter()
                .map(|&k| {
                    let t = fs.get(k);
                    (k, Tensor { len: 16, ch: k.channels(), data: t.data.clone() })
                })
                .collect()
        })
        .collect();
    let labels = [1, 2];
    let r = grad_check(
        &mut net,
        &mut |n| n.train_loss(&batch, &labels).unwrap(),
        &mut |n| {
            n.train_batch(&batch, &labels).unwrap();
        },
        GradCheckOptions::default(),
    );
    out.push(grad_entry("two-branch network", r));
    out
}

/// The whole suite at the sizes used by the command-line `selftest`.
pub fn run_all() -> Vec<Check> {
    let mut out = layer_oracles(1 << 16);
    out.extend(dft_oracle(1024));
    out.extend(cycle_frequency_examples());
    out.extend(gradient_checks());
    out
}
