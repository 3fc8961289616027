use std::collections::BTreeSet;

use cyclocap::cf::wrap_frequency;
use cyclocap::dataset::{Dataset, GenerationConfig, SnrDistribution};
use cyclocap::eval::{EvalReport, Truth};
use cyclocap::features::{extract_features, fft_mag_layer, pow3_layer, square_layer};
use cyclocap::nn::layers::{softmax, softmax_xent};
use cyclocap::preprocess::{normalize_utp, preprocess_frame, PreprocessConfig};
use cyclocap::signal::{synthesize_frame, FrameSpec, ModulationScheme};
use cyclocap::train::{split_dataset, SplitSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex_vec(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

fn naive_dft_mag(x: &[Complex64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, z)| z * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64))
                .sum::<Complex64>()
                .norm()
        })
        .collect()
}

fn spec(scheme: ModulationScheme, t0: u16, beta: f64, f0: f64, snr_db: f64, seed: u64) -> FrameSpec {
    FrameSpec {
        scheme,
        t0,
        beta,
        f0,
        snr_db,
        length: 2048,
        seed,
    }
}

fn manifest_config(frames_per_class: usize, seed: u64) -> GenerationConfig {
    GenerationConfig {
        name: "prop".into(),
        frames_per_class,
        t0_min: 2,
        t0_max: 4,
        frame_length: 64,
        master_seed: seed,
        ..GenerationConfig::ml2018()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn power_layers_match_complex_powers(x in complex_vec(1..64)) {
        let x2 = square_layer(&x);
        let x3 = pow3_layer(&x);
        for ((z, a), b) in x.iter().zip(&x2).zip(&x3) {
            prop_assert!((a - z.powi(2)).norm() <= 1e-12 * (1.0 + z.norm_sqr()));
            prop_assert!((b - z.powi(3)).norm() <= 1e-12 * (1.0 + z.norm_sqr() * z.norm()));
        }
    }

    #[test]
    fn fft_layer_is_centred_dft_magnitude(x in complex_vec(1..2), log_n in 0u32..8, fill in complex_vec(128..129)) {
        let n = 1usize << log_n;
        let mut v = fill[..n].to_vec();
        v[0] += x[0];
        let got = fft_mag_layer(&v).unwrap();
        let raw = naive_dft_mag(&v);
        let scale = raw.iter().cloned().fold(1.0, f64::max);
        for (i, g) in got.iter().enumerate() {
            // Bin k lands at index (k + n/2) mod n.
            let k = (i + n - n / 2) % n;
            prop_assert!((g - raw[k]).abs() <= 1e-9 * scale, "n {n} index {i}");
        }
        let energy: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let spectral: f64 = got.iter().map(|m| m * m).sum::<f64>() / n as f64;
        prop_assert!((energy - spectral).abs() <= 1e-9 * energy.max(1.0));
    }

    #[test]
    fn softmax_is_a_distribution_and_shift_invariant(
        logits in prop::collection::vec(-50.0f64..50.0, 1..12),
        c in -100.0f64..100.0,
        label_seed in any::<usize>(),
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| *v >= 0.0));
        let shifted: Vec<f64> = logits.iter().map(|v| v + c).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let label = label_seed % logits.len();
        let (loss, _, grad) = softmax_xent(&logits, label).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        prop_assert!((loss + p[label].max(f64::MIN_POSITIVE).ln()).abs() < 1e-9 || p[label] < 1e-300);
    }

    #[test]
    fn wrapped_frequencies_stay_in_half_open_interval(f in -40.0f64..40.0) {
        let w = wrap_frequency(f);
        prop_assert!(w > -0.5 && w <= 0.5);
        let k = f - w;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn split_is_a_stratified_partition(
        frames_per_class in 4usize..40,
        train in 0.3f64..0.9,
        val_share in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let ds = Dataset::generate(&manifest_config(frames_per_class, seed)).unwrap();
        let val = (1.0 - train) * val_share;
        let spec = SplitSpec { train_frac: train, val_frac: val, test_frac: 1.0 - train - val, seed };
        let split = split_dataset(&ds.manifest, &spec).unwrap();
        let all: BTreeSet<usize> = split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
        prop_assert_eq!(all.len(), ds.len());
        prop_assert_eq!(split.train.len() + split.val.len() + split.test.len(), ds.len());
        for s in ModulationScheme::ALL {
            let count = |ix: &[usize]| ix.iter().filter(|&&i| ds.manifest.frames[i].scheme == s).count();
            let (tr, va, te) = spec.counts(frames_per_class);
            prop_assert_eq!((count(&split.train), count(&split.val), count(&split.test)), (tr, va, te));
        }
        prop_assert_eq!(split_dataset(&ds.manifest, &spec).unwrap(), split);
    }

    #[test]
    fn eval_report_is_internally_consistent(
        rows in prop::collection::vec((0usize..5, 0usize..5, -5.0f64..20.0), 1..200),
    ) {
        let classes = &ModulationScheme::ALL[..5];
        let truth: Vec<Truth> = rows.iter().map(|r| Truth { class: r.0, snr_db: r.2 }).collect();
        let predicted: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let r = EvalReport::from_predictions("p", classes, &truth, &predicted).unwrap();
        let correct = rows.iter().filter(|r| r.0 == r.1).count();
        prop_assert_eq!(r.total, rows.len());
        prop_assert_eq!(r.correct, correct);
        prop_assert!((r.p_cc - correct as f64 / rows.len() as f64).abs() < 1e-15);
        prop_assert_eq!(r.counts.iter().flatten().sum::<usize>(), rows.len());
        for (i, row) in r.confusion.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if r.per_scheme[i].support > 0 {
                prop_assert!((s - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(s, 0.0);
            }
        }
        prop_assert_eq!(r.per_scheme.iter().map(|s| s.support).sum::<usize>(), rows.len());
        prop_assert_eq!(r.snr_bins.iter().map(|b| b.count).sum::<usize>(), rows.len());
        prop_assert_eq!(r.snr_bins.iter().map(|b| b.correct).sum::<usize>(), correct);
        prop_assert!(r.snr_bins.windows(2).all(|w| w[0].low_db < w[1].low_db));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn utp_output_has_unit_power(
        si in 0usize..8,
        t0 in 2u16..20,
        snr in -5.0f64..30.0,
        log_scale in -12.0f64..12.0,
        seed in any::<u64>(),
    ) {
        let frame = synthesize_frame(&spec(ModulationScheme::ALL[si], t0, 0.4, 0.01, snr, seed)).unwrap();
        let c = 10f64.powf(log_scale);
        let (out, factor) = normalize_utp(&frame.scaled(c)).unwrap();
        prop_assert!((out.mean_power() - 1.0).abs() <= 1e-6);
        prop_assert!(factor > 0.0 && factor.is_finite());
        let (full, rec) = preprocess_frame(&frame.scaled(c), &PreprocessConfig::default()).unwrap();
        prop_assert!((full.mean_power() - 1.0).abs() <= 1e-6);
        prop_assert!(rec.boi.bandwidth > 0.0 && rec.boi.bandwidth <= 1.0);
    }

    #[test]
    fn pipeline_ignores_input_scale(
        si in 0usize..8,
        t0 in 2u16..20,
        snr in 0.0f64..20.0,
        log_scale in -6.0f64..6.0,
        seed in any::<u64>(),
    ) {
        let frame = synthesize_frame(&spec(ModulationScheme::ALL[si], t0, 0.4, -0.01, snr, seed)).unwrap();
        let cfg = PreprocessConfig::default();
        let (a, ra) = preprocess_frame(&frame, &cfg).unwrap();
        let (b, rb) = preprocess_frame(&frame.scaled(10f64.powf(log_scale)), &cfg).unwrap();
        prop_assert!((ra.boi.center_freq - rb.boi.center_freq).abs() < 1e-12);
        let fa = extract_features(&a).unwrap();
        let fb = extract_features(&b).unwrap();
        for (ta, tb) in fa.tensors.iter().zip(&fb.tensors) {
            let scale = ta.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let worst = ta.data.iter().zip(&tb.data).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            prop_assert!(worst <= 1e-5 * scale, "{}: {worst} vs {scale}", ta.kind);
        }
    }

    #[test]
    fn snr_law_hits_requested_mean_inside_range(low in -10.0f64..10.0, width in 0.5f64..30.0, pos in 0.02f64..0.98) {
        let high = low + width;
        let mean = low + pos * width;
        let d = SnrDistribution::with_mean(low, high, mean);
        // Independent check: Simpson integration of x·exp(λx) on [0, 1].
        let n = 2000;
        let (mut z, mut m) = (0.0, 0.0);
        for i in 0..=n {
            let u = i as f64 / n as f64;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let p = (d.tilt * (u - if d.tilt > 0.0 { 1.0 } else { 0.0 })).exp();
            z += w * p;
            m += w * u * p;
        }
        let numeric = low + width * m / z;
        prop_assert!((numeric - mean).abs() < 1e-6 * width.max(1.0), "{numeric} vs {mean}");
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        for _ in 0..200 {
            let x = d.sample(&mut rng);
            prop_assert!(x >= low && x <= high);
        }
    }
}
