use std::collections::BTreeMap;
use std::f64::consts::PI;

use cyclocap::cf::{
    bin_distance, calibrate_min_order, detect_spectral_lines, expected_min_order, match_lines, CFPattern, ORDERS,
};
use cyclocap::features::{extract_features, extract_from_samples, FeatureKind, FeatureSet};
use cyclocap::signal::{synthesize_frame, FrameSpec, IQFrame, ModulationScheme};
use num_complex::Complex64;
use proptest::prelude::*;

fn noiseless(scheme: ModulationScheme, t0: u16, beta: f64, f0: f64, length: usize, seed: u64) -> IQFrame {
    synthesize_frame(&FrameSpec {
        scheme,
        t0,
        beta,
        f0,
        snr_db: f64::INFINITY,
        length,
        seed,
    })
    .unwrap()
}

fn golden_min_order() -> BTreeMap<ModulationScheme, u32> {
    include_str!("golden/min_order.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace();
            let s: ModulationScheme = it.next().unwrap().parse().unwrap();
            (s, it.next().unwrap().parse().unwrap())
        })
        .collect()
}

fn calibration_frames(scheme: ModulationScheme) -> Vec<FeatureSet> {
    let setups = [(4, 0.35, 0.013), (7, 0.2, -0.017), (10, 0.5, 0.004), (13, 0.3, -0.008)];
    setups
        .iter()
        .enumerate()
        .map(|(i, &(t0, beta, f0))| extract_features(&noiseless(scheme, t0, beta, f0, 8192, 40 + i as u64)).unwrap())
        .collect()
}

#[test]
fn golden_table_covers_every_scheme_and_agrees_with_lookup() {
    let golden = golden_min_order();
    assert_eq!(golden.len(), ModulationScheme::ALL.len());
    for s in ModulationScheme::ALL {
        assert_eq!(Some(golden[&s]), expected_min_order(s), "{s}");
    }
}

#[test]
fn empirical_min_order_reproduces_golden_table() {
    let golden = golden_min_order();
    for s in ModulationScheme::ALL {
        let frames = calibration_frames(s);
        assert_eq!(calibrate_min_order(&frames, 10.0).unwrap(), Some(golden[&s]), "{s}");
    }
}

#[test]
fn no_line_below_the_minimum_order() {
    for s in ModulationScheme::ALL {
        let min = expected_min_order(s).unwrap();
        for fs in calibration_frames(s) {
            for n in ORDERS.into_iter().filter(|n| *n < min) {
                let lines = detect_spectral_lines(fs.get(FeatureKind::freq_of_order(n).unwrap()), 10.0).unwrap();
                assert!(lines.is_empty(), "{s} order {n}: {lines:?}");
            }
        }
    }
}

#[test]
fn freq2_separates_bpsk_from_msk() {
    let bpsk = extract_features(&noiseless(ModulationScheme::Bpsk, 8, 0.35, 0.01, 8192, 3)).unwrap();
    let msk = extract_features(&noiseless(ModulationScheme::Msk, 8, 0.35, 0.01, 8192, 3)).unwrap();
    let top = |fs: &FeatureSet| detect_spectral_lines(fs.get(FeatureKind::Freq2), 10.0).unwrap()[0].frequency;
    // BPSK: carrier line at 2 f0. MSK: pair at 2 f0 ± 1/(2 T0).
    assert!(bin_distance(top(&bpsk), 0.02, 8192) <= 2.0);
    let m = top(&msk);
    assert!(bin_distance(m, 0.02 + 0.0625, 8192) <= 2.0 || bin_distance(m, 0.02 - 0.0625, 8192) <= 2.0, "{m}");
}

fn shift(frame: &IQFrame, df: f64) -> Vec<Complex64> {
    frame
        .to_complex()
        .iter()
        .enumerate()
        .map(|(t, z)| z * Complex64::from_polar(1.0, 2.0 * PI * df * t as f64))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn lines_sit_on_predicted_cycle_frequencies(
        si in 0usize..8,
        t0 in 4u16..16,
        beta in 0.15f64..0.6,
        f0 in -0.02f64..0.02,
        seed in any::<u64>(),
    ) {
        let s = ModulationScheme::ALL[si];
        let frame = noiseless(s, t0, beta, f0, 4096, seed);
        let fs = extract_features(&frame).unwrap();
        for m in match_lines(&fs, CFPattern::of(s), f0, t0 as f64, 10.0).unwrap() {
            let err = m.bin_error.unwrap_or(f64::INFINITY);
            prop_assert!(err <= 2.0, "{s} order {} line {:?} off by {err} bins", m.order, m.line);
        }
    }

    #[test]
    fn frequency_shift_moves_order_n_lines_by_n_delta(
        si in 0usize..8,
        t0 in 4u16..12,
        f0 in -0.01f64..0.01,
        df in -0.01f64..0.01,
        seed in any::<u64>(),
    ) {
        let s = ModulationScheme::ALL[si];
        let n_len = 4096;
        let frame = noiseless(s, t0, 0.35, f0, n_len, seed);
        let base = extract_features(&frame).unwrap();
        let moved = extract_from_samples(&shift(&frame, df)).unwrap();
        for n in ORDERS {
            let kind = FeatureKind::freq_of_order(n).unwrap();
            let before = detect_spectral_lines(base.get(kind), 15.0).unwrap();
            let after = detect_spectral_lines(moved.get(kind), 10.0).unwrap();
            for line in before.iter().take(2) {
                let target = line.frequency + n as f64 * df;
                let best = after
                    .iter()
                    .map(|l| bin_distance(l.frequency, target, n_len))
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(best <= 1.0, "{s} order {n}: {:?} expected near {target}, best {best}", line);
            }
        }
    }
}
