//! Square-root raised-cosine pulse.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Pulse span (in symbols) used by the frame synthesizer.
pub const DEFAULT_SPAN_SYMBOLS: usize = 16;

/// SRRC impulse response at `tau` symbol periods, unit symbol period,
/// peak value `1 - β + 4β/π`.
pub fn srrc_pulse(tau: f64, beta: f64) -> f64 {
    if tau.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let edge = 1.0 / (4.0 * beta);
    if (tau.abs() - edge).abs() < 1e-8 {
        let a = PI / (4.0 * beta);
        return beta / SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let x = 4.0 * beta * tau;
    let num = (PI * tau * (1.0 - beta)).sin() + x * (PI * tau * (1.0 + beta)).cos();
    num / (PI * tau * (1.0 - x * x))
}

/// Unit-energy SRRC taps at `t0` samples per symbol spanning `span_symbols`
/// symbols. The tap count is odd and the response is centred.
pub fn srrc_taps(beta: f64, t0: usize, span_symbols: usize) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("roll-off {beta} outside (0, 1]")));
    }
    if t0 == 0 {
        return Err(Error::invalid("symbol period must be at least one sample"));
    }
    if span_symbols < 8 {
        return Err(Error::invalid(format!(
            "span of {span_symbols} symbols is below the minimum of 8"
        )));
    }
    let half = (span_symbols * t0) / 2;
    let mut taps: Vec<f64> = (0..=2 * half)
        .map(|n| srrc_pulse((n as f64 - half as f64) / t0 as f64, beta))
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = energy.sqrt().recip();
    taps.iter_mut().for_each(|h| *h *= scale);
    Ok(taps)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (1..=n)
            .map(|i| {
                let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    }

    /// Independent evaluator: inverse Fourier transform of the square root of
    /// the raised-cosine spectrum, integrated piecewise by quadrature.
    fn srrc_by_quadrature(tau: f64, beta: f64, gl: &[(f64, f64)]) -> f64 {
        let f1 = (1.0 - beta) / 2.0;
        let f2 = (1.0 + beta) / 2.0;
        let flat = if tau == 0.0 {
            f1
        } else {
            (2.0 * PI * f1 * tau).sin() / (2.0 * PI * tau)
        };
        let half = (f2 - f1) / 2.0;
        let mid = (f2 + f1) / 2.0;
        let roll: f64 = gl
            .iter()
            .map(|&(x, w)| {
                let f = mid + half * x;
                let h = (PI / (2.0 * beta) * (f - f1)).cos();
                w * h * (2.0 * PI * f * tau).cos()
            })
            .sum::<f64>()
            * half;
        2.0 * (flat + roll)
    }

    #[test]
    fn matches_frequency_domain_oracle() {
        let gl = gauss_legendre(64);
        let (beta, t0, span) = (0.35, 8usize, 16usize);
        let taps = srrc_taps(beta, t0, span).unwrap();
        let half = (span * t0 / 2) as f64;
        let oracle: Vec<f64> = (0..taps.len())
            .map(|n| srrc_by_quadrature((n as f64 - half) / t0 as f64, beta, &gl))
            .collect();
        let e = oracle.iter().map(|h| h * h).sum::<f64>().sqrt();
        let max_diff = taps
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b / e).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-9, "max abs diff {max_diff}");
    }

    #[test]
    fn singular_points_are_continuous() {
        for beta in [0.25, 0.5, 1.0] {
            let edge = 1.0 / (4.0 * beta);
            let at = srrc_pulse(edge, beta);
            let near = srrc_pulse(edge + 1e-5, beta);
            assert!((at - near).abs() < 1e-4, "beta {beta}: {at} vs {near}");
        }
    }

    #[test]
    fn cascade_is_nyquist() {
        // small roll-offs decay slowly and need a longer span
        for &(beta, t0, span) in &[(0.35, 8usize, 32), (0.1, 5, 96), (1.0, 4, 32), (0.6, 11, 32)] {
            let taps = srrc_taps(beta, t0, span).unwrap();
            let n = taps.len();
            let full: Vec<f64> = (0..2 * n - 1)
                .map(|k| {
                    (0..n)
                        .filter(|&i| k >= i && k - i < n)
                        .map(|i| taps[i] * taps[k - i])
                        .sum()
                })
                .collect();
            let centre = n - 1;
            for m in -(centre as i64 / t0 as i64)..=(centre as i64 / t0 as i64) {
                let v = full[(centre as i64 + m * t0 as i64) as usize];
                let want = if m == 0 { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-3, "beta {beta} t0 {t0} m {m}: {v}");
            }
        }
    }

    #[test]
    fn taps_are_symmetric_and_odd_length() {
        let taps = srrc_taps(0.5, 7, 16).unwrap();
        assert_eq!(taps.len() % 2, 1);
        let rev: Vec<f64> = taps.iter().rev().copied().collect();
        assert_eq!(taps, rev);
        let e: f64 = taps.iter().map(|h| h * h).sum();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(srrc_taps(0.0, 8, 16).is_err());
        assert!(srrc_taps(1.2, 8, 16).is_err());
        assert!(srrc_taps(0.3, 8, 4).is_err());
        assert!(srrc_taps(0.3, 0, 16).is_err());
    }
}
