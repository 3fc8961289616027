//! Fixed nonlinear feature layers that sit in front of the CNN branches.
//!
//! Two elementwise layers, squaring and cubing of the complex sample written
//! out in I/Q arithmetic, plus a centred FFT magnitude. Chaining them gives
//! the second, fourth, sixth and eighth powers of the signal and their
//! spectra:
//!
//! ```text
//! x ─ square ─ x² ─┬─ square ─ x⁴ ─ square ─ x⁸
//!                  └─ pow3 ─── x⁶
//! FREQk = |FFT(xᵏ)| with DC at index N/2
//! ```
//!
//! Nothing here is trainable; outputs are pure functions of the frame.

use std::fmt;
use std::str::FromStr;

use num_complex::{Complex, Complex64};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::IQFrame;

/// `(I, Q) ↦ (I·I − Q·Q, 2·I·Q)`.
pub fn square_layer<T: Float>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let two = T::one() + T::one();
    x.iter()
        .map(|z| {
            let (i, q) = (z.re, z.im);
            Complex::new(i * i - q * q, two * i * q)
        })
        .collect()
}

/// `(I, Q) ↦ (I·I·I − 3·I·Q·Q, 3·I·I·Q − Q·Q·Q)`.
pub fn pow3_layer<T: Float>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let three = T::one() + T::one() + T::one();
    x.iter()
        .map(|z| {
            let (i, q) = (z.re, z.im);
            Complex::new(i * i * i - three * i * q * q, three * i * i * q - q * q * q)
        })
        .collect()
}

/// Magnitude of the DFT with the zero-frequency bin rotated to index `N/2`.
pub fn fft_mag_layer(x: &[Complex64]) -> Result<Vec<f64>> {
    if !x.len().is_power_of_two() {
        return Err(Error::invalid(format!(
            "FFT layer needs a power-of-two length, got {}",
            x.len()
        )));
    }
    let mut buf = x.to_vec();
    fft::forward(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    Ok(fft::fftshift(&mag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureKind {
    Time2,
    Time4,
    Time6,
    Time8,
    Freq2,
    Freq4,
    Freq6,
    Freq8,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 8] = [
        FeatureKind::Time2,
        FeatureKind::Time4,
        FeatureKind::Time6,
        FeatureKind::Time8,
        FeatureKind::Freq2,
        FeatureKind::Freq4,
        FeatureKind::Freq6,
        FeatureKind::Freq8,
    ];

    pub fn order(self) -> u32 {
        match self {
            FeatureKind::Time2 | FeatureKind::Freq2 => 2,
            FeatureKind::Time4 | FeatureKind::Freq4 => 4,
            FeatureKind::Time6 | FeatureKind::Freq6 => 6,
            FeatureKind::Time8 | FeatureKind::Freq8 => 8,
        }
    }

    pub fn is_time(self) -> bool {
        matches!(
            self,
            FeatureKind::Time2 | FeatureKind::Time4 | FeatureKind::Time6 | FeatureKind::Time8
        )
    }

    pub fn channels(self) -> usize {
        if self.is_time() {
            2
        } else {
            1
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn freq_of_order(n: u32) -> Option<FeatureKind> {
        match n {
            2 => Some(FeatureKind::Freq2),
            4 => Some(FeatureKind::Freq4),
            6 => Some(FeatureKind::Freq6),
            8 => Some(FeatureKind::Freq8),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Time2 => "TIME2",
            FeatureKind::Time4 => "TIME4",
            FeatureKind::Time6 => "TIME6",
            FeatureKind::Time8 => "TIME8",
            FeatureKind::Freq2 => "FREQ2",
            FeatureKind::Freq4 => "FREQ4",
            FeatureKind::Freq6 => "FREQ6",
            FeatureKind::Freq8 => "FREQ8",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == up)
            .ok_or_else(|| Error::invalid(format!("unknown feature kind '{s}'")))
    }
}

/// `length × channels` values, row-major (I, Q interleaved for time kinds).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub kind: FeatureKind,
    pub length: usize,
    pub data: Vec<f64>,
}

impl FeatureTensor {
    fn time(kind: FeatureKind, x: &[Complex64]) -> Self {
        FeatureTensor {
            kind,
            length: x.len(),
            data: x.iter().flat_map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn channels(&self) -> usize {
        self.kind.channels()
    }

    /// Time-domain tensors as complex samples.
    pub fn as_complex(&self) -> Option<Vec<Complex64>> {
        self.kind.is_time().then(|| {
            self.data
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect()
        })
    }
}

/// The eight feature tensors of one frame, in [`FeatureKind::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub tensors: Vec<FeatureTensor>,
}

impl FeatureSet {
    pub fn get(&self, kind: FeatureKind) -> &FeatureTensor {
        &self.tensors[kind.index()]
    }

    pub fn length(&self) -> usize {
        self.tensors[0].length
    }
}

/// Runs the full feature tree on a (preprocessed) frame.
pub fn extract_features(frame: &IQFrame) -> Result<FeatureSet> {
    extract_from_samples(&frame.to_complex())
}

pub fn extract_from_samples(x: &[Complex64]) -> Result<FeatureSet> {
    if !x.len().is_power_of_two() {
        return Err(Error::invalid(format!(
            "frame length {} is not a power of two",
            x.len()
        )));
    }
    let x2 = square_layer(x);
    let x4 = square_layer(&x2);
    let x6 = pow3_layer(&x2);
    let x8 = square_layer(&x4);
    let mut tensors = Vec::with_capacity(8);
    for (kind, v) in [
        (FeatureKind::Time2, &x2),
        (FeatureKind::Time4, &x4),
        (FeatureKind::Time6, &x6),
        (FeatureKind::Time8, &x8),
    ] {
        tensors.push(FeatureTensor::time(kind, v));
    }
    for (kind, v) in [
        (FeatureKind::Freq2, &x2),
        (FeatureKind::Freq4, &x4),
        (FeatureKind::Freq6, &x6),
        (FeatureKind::Freq8, &x8),
    ] {
        tensors.push(FeatureTensor {
            kind,
            length: v.len(),
            data: fft_mag_layer(v)?,
        });
    }
    Ok(FeatureSet { tensors })
}

/// Fixed per-kind gains that bring each feature's mean absolute value to one
/// on the calibration (training) frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub gains: [f64; 8],
}

impl Default for FeatureScaling {
    fn default() -> Self {
        FeatureScaling { gains: [1.0; 8] }
    }
}

/// Running per-kind magnitude sums for [`FeatureScaling`], so calibration
/// can stream over frames.
#[derive(Debug, Clone, Default)]
pub struct ScalingStats {
    sums: [f64; 8],
    counts: [usize; 8],
}

impl ScalingStats {
    pub fn add(&mut self, set: &FeatureSet) {
        for t in &set.tensors {
            let k = t.kind.index();
            self.sums[k] += t.data.iter().map(|v| v.abs()).sum::<f64>();
            self.counts[k] += t.data.len();
        }
    }

    pub fn finish(&self) -> Result<FeatureScaling> {
        let mut gains = [1.0; 8];
        for k in 0..8 {
            if self.counts[k] == 0 {
                return Err(Error::invalid("no frames to calibrate feature scaling"));
            }
            let mean = self.sums[k] / self.counts[k] as f64;
            if !(mean > 0.0 && mean.is_finite()) {
                return Err(Error::Numeric(format!(
                    "feature {} has mean magnitude {mean}",
                    FeatureKind::ALL[k]
                )));
            }
            gains[k] = mean.recip();
        }
        Ok(FeatureScaling { gains })
    }
}

impl FeatureScaling {
    /// Mean absolute value per kind over `sets`, inverted.
    pub fn calibrate<'a>(sets: impl IntoIterator<Item = &'a FeatureSet>) -> Result<Self> {
        let mut stats = ScalingStats::default();
        for set in sets {
            stats.add(set);
        }
        stats.finish()
    }

    /// Scaled single-precision copy of one tensor, ready for the network.
    pub fn apply(&self, t: &FeatureTensor) -> Vec<f32> {
        let g = self.gains[t.kind.index()];
        t.data.iter().map(|v| (v * g) as f32).collect()
    }
}
