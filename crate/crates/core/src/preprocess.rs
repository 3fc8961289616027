//! Blind band-of-interest detection, out-of-band filtering, spectral
//! centring and unit-total-power normalization.
//!
//! The detector is an energy detector on a Welch PSD: the median bin is taken
//! as the noise floor, bins above `threshold_factor × floor` are marked,
//! gaps shorter than `gap_bins` are closed and the longest marked run is the
//! band. Its centre is the centroid of the power above the floor.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PreprocessRecord};
use crate::error::{Error, Result};
use crate::fft;
use crate::signal::IQFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Welch segment length; shortened to `frame_length / 8` for short frames.
    pub segment_length: usize,
    /// Fractional segment overlap in `[0, 1)`.
    pub overlap: f64,
    pub threshold_factor: f64,
    pub gap_bins: usize,
    pub guard_factor: f64,
    /// Raised-cosine transition width of the band mask, in frame-FFT bins.
    pub transition_bins: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            segment_length: 1024,
            overlap: 0.5,
            threshold_factor: 3.0,
            gap_bins: 5,
            guard_factor: 1.2,
            transition_bins: 32,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.segment_length.is_power_of_two() || self.segment_length < 16 {
            return Err(Error::Config(format!(
                "segment_length {} must be a power of two >= 16",
                self.segment_length
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("overlap {} outside [0, 1)", self.overlap)));
        }
        if !(self.threshold_factor > 1.0) {
            return Err(Error::Config("threshold_factor must exceed 1".into()));
        }
        if !(self.guard_factor >= 1.0) {
            return Err(Error::Config("guard_factor must be at least 1".into()));
        }
        Ok(())
    }

    /// Segment length actually used for a frame of `frame_length` samples.
    pub fn segment_for(&self, frame_length: usize) -> usize {
        self.segment_length.min(frame_length / 8).max(16)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoiEstimate {
    /// Cycles/sample.
    pub center_freq: f64,
    /// Cycles/sample, in `(0, 1]`.
    pub bandwidth: f64,
    /// Median PSD bin (power per unit frequency).
    pub noise_floor: f64,
    /// Set when no bin cleared the threshold and the full band was returned.
    pub fallback: bool,
}

impl BoiEstimate {
    pub fn full_band(noise_floor: f64) -> Self {
        BoiEstimate {
            center_freq: 0.0,
            bandwidth: 1.0,
            noise_floor,
            fallback: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth <= 1.0) || !(self.center_freq.abs() < 0.5) {
            return Err(Error::invalid(format!(
                "band estimate out of range: centre {}, width {}",
                self.center_freq, self.bandwidth
            )));
        }
        Ok(())
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Welch-averaged periodogram (periodic Hann window), shifted so that index 0
/// is −0.5 cycles/sample. Scaled so that `Σ psd / segment_length` equals the
/// mean power of the frame.
pub fn estimate_psd(frame: &IQFrame, segment_length: usize, overlap: f64) -> Result<Vec<f64>> {
    if !segment_length.is_power_of_two() {
        return Err(Error::invalid(format!(
            "segment length {segment_length} is not a power of two"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap {overlap} outside [0, 1)")));
    }
    let n = frame.len();
    if n < segment_length {
        return Err(Error::invalid(format!(
            "frame of {n} samples is shorter than one {segment_length}-sample segment"
        )));
    }
    let hop = (segment_length - (overlap * segment_length as f64).round() as usize).max(1);
    let window = hann(segment_length);
    let u = window.iter().map(|w| w * w).sum::<f64>() / segment_length as f64;
    let x = frame.to_complex();
    let mut acc = vec![0.0; segment_length];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_length];
    let mut segments = 0usize;
    let mut start = 0;
    while start + segment_length <= n {
        for (b, (s, w)) in buf.iter_mut().zip(x[start..].iter().zip(&window)) {
            *b = s * w;
        }
        fft::forward(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (segments as f64 * segment_length as f64 * u);
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(fft::fftshift(&acc))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Locates the occupied band in a shifted PSD.
///
/// Never fails on a non-empty PSD: when nothing clears the threshold the
/// full band centred at zero is returned with `fallback` set.
pub fn detect_boi(psd: &[f64], threshold_factor: f64, gap_bins: usize) -> Result<BoiEstimate> {
    if psd.is_empty() {
        return Err(Error::invalid("empty PSD"));
    }
    let n = psd.len();
    let floor = median(psd);
    let threshold = floor * threshold_factor;
    let mut above: Vec<bool> = psd.iter().map(|&p| p > threshold).collect();

    // Morphological closing: fill interior gaps shorter than gap_bins.
    let mut k = 0;
    while k < n {
        if above[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < n && !above[k] {
            k += 1;
        }
        if start > 0 && k < n && k - start < gap_bins {
            above[start..k].iter_mut().for_each(|a| *a = true);
        }
    }

    let mut best: Option<(usize, usize)> = None;
    let mut k = 0;
    while k < n {
        if !above[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k < n && above[k] {
            k += 1;
        }
        if best.map_or(true, |(s, e)| k - start > e - s) {
            best = Some((start, k));
        }
    }

    let Some((start, end)) = best else {
        return Ok(BoiEstimate::full_band(floor));
    };
    let (mut num, mut den) = (0.0, 0.0);
    for (j, &p) in psd.iter().enumerate().take(end).skip(start) {
        let w = (p - floor).max(0.0);
        num += w * fft::shifted_frequency(j, n);
        den += w;
    }
    let center_freq = if den > 0.0 {
        num / den
    } else {
        fft::shifted_frequency((start + end) / 2, n)
    };
    Ok(BoiEstimate {
        center_freq,
        bandwidth: (end - start) as f64 / n as f64,
        noise_floor: floor,
        fallback: false,
    })
}

/// Mixes the band to zero frequency, then applies a frequency-domain
/// low-pass mask: flat to `guard_factor × bandwidth / 2`, raised-cosine
/// roll-off over `transition_bins` bins, zero beyond.
pub fn apply_boi(
    frame: &IQFrame,
    boi: &BoiEstimate,
    guard_factor: f64,
    transition_bins: usize,
) -> Result<IQFrame> {
    boi.validate()?;
    let n = frame.len();
    let mut x = frame.to_complex();
    if boi.center_freq != 0.0 {
        for (t, z) in x.iter_mut().enumerate() {
            let arg = -2.0 * PI * (boi.center_freq * t as f64 % 1.0);
            *z *= Complex64::from_polar(1.0, arg);
        }
    }
    let pass = guard_factor * boi.bandwidth / 2.0;
    if pass < 0.5 {
        let trans = transition_bins as f64 / n as f64;
        fft::forward(&mut x);
        for (k, z) in x.iter_mut().enumerate() {
            let f = fft::bin_frequency(k, n).abs();
            let gain = if f <= pass {
                1.0
            } else if trans > 0.0 && f < pass + trans {
                0.5 * (1.0 + (PI * (f - pass) / trans).cos())
            } else {
                0.0
            };
            *z *= gain;
        }
        fft::inverse(&mut x);
    }
    Ok(IQFrame::from_complex(&x, frame.spec))
}

/// Scales a frame to unit mean `I² + Q²`; returns the frame and the scale
/// factor that was applied.
pub fn normalize_utp(frame: &IQFrame) -> Result<(IQFrame, f64)> {
    let p = frame.mean_power();
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid(format!(
            "cannot normalize a frame with mean power {p}"
        )));
    }
    let scale = p.sqrt().recip();
    let mut out = frame.scaled(scale);
    // One refinement pass removes the rounding left by the first scaling.
    let r = out.mean_power().sqrt().recip();
    if r != 1.0 {
        out = out.scaled(r);
    }
    Ok((out, scale * r))
}

/// Detect, filter, centre and normalize one frame.
pub fn preprocess_frame(frame: &IQFrame, cfg: &PreprocessConfig) -> Result<(IQFrame, PreprocessRecord)> {
    let psd = estimate_psd(frame, cfg.segment_for(frame.len()), cfg.overlap)?;
    let boi = detect_boi(&psd, cfg.threshold_factor, cfg.gap_bins)?;
    let filtered = apply_boi(frame, &boi, cfg.guard_factor, cfg.transition_bins)?;
    let (out, scale_factor) = normalize_utp(&filtered)?;
    Ok((out, PreprocessRecord { boi, scale_factor }))
}

/// Preprocesses every frame (parallel per frame) and records the outcome in
/// the manifest. Already-preprocessed datasets are rejected.
pub fn preprocess_dataset(ds: &Dataset, cfg: &PreprocessConfig) -> Result<Dataset> {
    cfg.validate()?;
    if ds.manifest.preprocessed {
        return Err(Error::invalid("dataset is already preprocessed"));
    }
    let results = ds
        .frames
        .par_iter()
        .map(|f| preprocess_frame(f, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = ds.manifest.clone();
    manifest.preprocessed = true;
    manifest.preprocess_config = Some(*cfg);
    let mut frames = Vec::with_capacity(results.len());
    for ((frame, record), rec) in results.into_iter().zip(manifest.frames.iter_mut()) {
        rec.preprocessing = Some(record);
        frames.push(frame);
    }
    Ok(Dataset { manifest, frames })
}
