//! Cycle-frequency ground truth and a spectral-line detector for the FREQ
//! features.
//!
//! A nonconjugate order-`n` line sits at `α = (n − 2m)·f0 ± k/T0`. Some
//! schemes shift the harmonic grid by half a symbol rate (π/4-DQPSK at order
//! four, MSK at orders two and six), which [`CFPattern::harmonic_offset`]
//! captures.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureTensor};
use crate::signal::ModulationScheme;

pub const ORDERS: [u32; 4] = [2, 4, 6, 8];
pub const MAX_HARMONIC: u32 = 5;

/// Half-width of the triangular smoothing kernel, in bins.
pub const SMOOTH_HALF_WIDTH: usize = 4;
/// Half-width of the window used for the local noise-floor median.
pub const FLOOR_HALF_WIDTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CFParams {
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub f0: f64,
    pub t0: f64,
}

impl CFParams {
    pub fn new(n: u32, k: u32, f0: f64, t0: f64) -> Self {
        CFParams { n, m: 0, k, f0, t0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::invalid(format!("symbol period must be positive, got {}", self.t0)));
        }
        if self.n == 0 || self.n % 2 != 0 || self.n > 8 {
            return Err(Error::invalid(format!("order must be one of 2, 4, 6, 8, got {}", self.n)));
        }
        if 2 * self.m > self.n {
            return Err(Error::invalid(format!("conjugation count {} exceeds n/2", self.m)));
        }
        if self.k > MAX_HARMONIC {
            return Err(Error::invalid(format!("harmonic {} exceeds {MAX_HARMONIC}", self.k)));
        }
        if !self.f0.is_finite() {
            return Err(Error::invalid("carrier offset must be finite"));
        }
        Ok(())
    }
}

/// Maps a frequency into `(−0.5, 0.5]`.
pub fn wrap_frequency(f: f64) -> f64 {
    f - (f - 0.5).ceil()
}

fn push_unique(out: &mut Vec<f64>, a: f64) {
    if !out.iter().any(|b| (a - b).abs() < 1e-12) {
        out.push(a);
    }
}

/// `(n − 2m)·f0 ± k/T0`, wrapped and deduplicated.
pub fn cycle_frequencies(p: &CFParams) -> Result<Vec<f64>> {
    p.validate()?;
    let centre = (p.n - 2 * p.m) as f64 * p.f0;
    let step = p.k as f64 / p.t0;
    let mut out = Vec::with_capacity(2);
    push_unique(&mut out, wrap_frequency(centre + step));
    push_unique(&mut out, wrap_frequency(centre - step));
    Ok(out)
}

/// Union of [`cycle_frequencies`] over `k = 0..=k_max`.
pub fn cycle_frequency_set(n: u32, m: u32, f0: f64, t0: f64, k_max: u32) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..=k_max {
        for a in cycle_frequencies(&CFParams { n, m, k, f0, t0 })? {
            push_unique(&mut out, a);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CFPattern {
    BpskLike,
    QamLike,
    DqpskPi4Like,
    Psk8Like,
    SqpskLike,
}

impl CFPattern {
    pub const ALL: [CFPattern; 5] = [
        CFPattern::BpskLike,
        CFPattern::QamLike,
        CFPattern::DqpskPi4Like,
        CFPattern::Psk8Like,
        CFPattern::SqpskLike,
    ];

    pub fn of(scheme: ModulationScheme) -> Self {
        use ModulationScheme::*;
        match scheme {
            Bpsk => CFPattern::BpskLike,
            Qpsk | Qam16 | Qam64 | Qam256 => CFPattern::QamLike,
            Psk8 => CFPattern::Psk8Like,
            DqpskPi4 => CFPattern::DqpskPi4Like,
            Msk => CFPattern::SqpskLike,
        }
    }

    /// `None` when the pattern has no order-`n` lines, otherwise the offset
    /// of the harmonic grid (`0` for `k/T0`, `0.5` for `(k + ½)/T0`).
    pub fn harmonic_offset(self, n: u32) -> Option<f64> {
        match (self, n) {
            (CFPattern::BpskLike, 2 | 4 | 6 | 8) => Some(0.0),
            (CFPattern::QamLike, 4 | 8) => Some(0.0),
            (CFPattern::Psk8Like, 8) => Some(0.0),
            (CFPattern::DqpskPi4Like, 4) => Some(0.5),
            (CFPattern::DqpskPi4Like, 8) => Some(0.0),
            (CFPattern::SqpskLike, 2 | 6) => Some(0.5),
            (CFPattern::SqpskLike, 4 | 8) => Some(0.0),
            _ => None,
        }
    }

    /// Every order-`n` line location up to `k_max` harmonics.
    pub fn line_frequencies(self, n: u32, f0: f64, t0: f64, k_max: u32) -> Result<Vec<f64>> {
        CFParams::new(n, 0, f0, t0).validate()?;
        let Some(offset) = self.harmonic_offset(n) else {
            return Ok(Vec::new());
        };
        let centre = n as f64 * f0;
        let mut out = Vec::new();
        for k in 0..=k_max {
            let step = (k as f64 + offset) / t0;
            push_unique(&mut out, wrap_frequency(centre + step));
            push_unique(&mut out, wrap_frequency(centre - step));
        }
        Ok(out)
    }
}

impl fmt::Display for CFPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CFPattern::BpskLike => "BPSK_like",
            CFPattern::QamLike => "QAM_like",
            CFPattern::DqpskPi4Like => "DQPSK_PI4_like",
            CFPattern::Psk8Like => "PSK8_like",
            CFPattern::SqpskLike => "SQPSK_like",
        })
    }
}

/// Smallest order with a detectable line in noiseless frames. Frozen from
/// [`calibrate_min_order`]; `tests/golden/min_order.txt` holds the same table.
pub fn expected_min_order(scheme: ModulationScheme) -> Option<u32> {
    use ModulationScheme::*;
    Some(match scheme {
        Bpsk | Msk => 2,
        Qpsk | DqpskPi4 | Qam16 | Qam64 | Qam256 => 4,
        Psk8 => 8,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub index: usize,
    pub frequency: f64,
    pub prominence_db: f64,
}

fn smooth_power(mag: &[f64]) -> Vec<f64> {
    let n = mag.len();
    let h = SMOOTH_HALF_WIDTH as isize;
    let norm = ((h + 1) * (h + 1)) as f64;
    let p: Vec<f64> = mag.iter().map(|v| v * v).collect();
    (0..n as isize)
        .map(|i| {
            (-h..=h)
                .map(|d| {
                    let w = (h + 1 - d.abs()) as f64;
                    w * p[(i + d).rem_euclid(n as isize) as usize]
                })
                .sum::<f64>()
                / norm
        })
        .collect()
}

/// Finds spectral lines in a FREQ feature.
///
/// Power is smoothed with a short triangular kernel, every local maximum is
/// compared with the median of the smoothed power within ±64 bins, and the
/// reported index is the largest raw bin within the kernel's reach.
pub fn detect_spectral_lines(t: &FeatureTensor, min_prominence_db: f64) -> Result<Vec<SpectralLine>> {
    if t.kind.is_time() {
        return Err(Error::invalid(format!("line detection needs a FREQ feature, got {}", t.kind)));
    }
    Ok(detect_lines_in_magnitude(&t.data, min_prominence_db))
}

/// Same as [`detect_spectral_lines`] on a bare centred magnitude spectrum.
pub fn detect_lines_in_magnitude(mag: &[f64], min_prominence_db: f64) -> Vec<SpectralLine> {
    let n = mag.len();
    if n < 2 * FLOOR_HALF_WIDTH + 1 {
        return Vec::new();
    }
    let s = smooth_power(mag);
    let at = |i: isize| s[i.rem_euclid(n as isize) as usize];
    let mut window = Vec::with_capacity(2 * FLOOR_HALF_WIDTH + 1);
    let mut found: Vec<SpectralLine> = Vec::new();
    for i in 0..n as isize {
        let v = at(i);
        if !(v > at(i - 1) && v >= at(i + 1) && v > 0.0) {
            continue;
        }
        window.clear();
        let w = FLOOR_HALF_WIDTH as isize;
        window.extend((-w..=w).map(|d| at(i + d)));
        let mid = window.len() / 2;
        let (_, median, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
        let prominence_db = 10.0 * (v / median.max(f64::MIN_POSITIVE)).log10();
        if prominence_db < min_prominence_db {
            continue;
        }
        let h = SMOOTH_HALF_WIDTH as isize;
        let index = (-h..=h)
            .map(|d| (i + d).rem_euclid(n as isize) as usize)
            .max_by(|a, b| mag[*a].total_cmp(&mag[*b]))
            .unwrap();
        let line = SpectralLine {
            index,
            frequency: (index as f64 - (n / 2) as f64) / n as f64,
            prominence_db,
        };
        match found.iter_mut().find(|l| l.index == index) {
            Some(prev) if prev.prominence_db < prominence_db => *prev = line,
            Some(_) => {}
            None => found.push(line),
        }
    }
    found.sort_by(|a, b| b.prominence_db.total_cmp(&a.prominence_db).then(a.index.cmp(&b.index)));
    found
}

/// Circular distance between two frequencies, in bins of a length-`n` DFT.
pub fn bin_distance(a: f64, b: f64, n: usize) -> f64 {
    wrap_frequency(a - b).abs() * n as f64
}

/// Empirical minimum line order over the given noiseless FREQ feature sets.
/// An order counts when at least half of the frames show a line there.
pub fn calibrate_min_order<'a>(
    features: impl IntoIterator<Item = &'a crate::features::FeatureSet>,
    min_prominence_db: f64,
) -> Result<Option<u32>> {
    let mut hits = [0usize; 4];
    let mut total = 0usize;
    for fs in features {
        total += 1;
        for (slot, n) in ORDERS.iter().enumerate() {
            let kind = FeatureKind::freq_of_order(*n).unwrap();
            if !detect_spectral_lines(fs.get(kind), min_prominence_db)?.is_empty() {
                hits[slot] += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::invalid("no frames to calibrate on"));
    }
    Ok(ORDERS
        .iter()
        .zip(hits)
        .find(|(_, h)| 2 * h >= total)
        .map(|(n, _)| *n))
}

/// A detected line next to the closest pattern-predicted cycle frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMatch {
    pub order: u32,
    pub line: SpectralLine,
    /// Closest predicted α at this order, if the pattern predicts any.
    pub predicted: Option<f64>,
    pub bin_error: Option<f64>,
}

/// Every line above `min_prominence_db` in the FREQ features of `fs`, matched
/// against the cycle frequencies `pattern` predicts for `(f0, t0)`.
pub fn match_lines(
    fs: &crate::features::FeatureSet,
    pattern: CFPattern,
    f0: f64,
    t0: f64,
    min_prominence_db: f64,
) -> Result<Vec<LineMatch>> {
    let mut out = Vec::new();
    for n in ORDERS {
        let t = fs.get(FeatureKind::freq_of_order(n).expect("even order"));
        let predicted = pattern.line_frequencies(n, f0, t0, MAX_HARMONIC)?;
        for line in detect_spectral_lines(t, min_prominence_db)? {
            let best = predicted
                .iter()
                .map(|&a| (a, bin_distance(line.frequency, a, t.length)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            out.push(LineMatch {
                order: n,
                line,
                predicted: best.map(|b| b.0),
                bin_error: best.map(|b| b.1),
            });
        }
    }
    Ok(out)
}
