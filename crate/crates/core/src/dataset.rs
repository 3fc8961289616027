//! Labelled dataset generation, manifests and on-disk layout.
//!
//! A dataset directory holds `frames.bin` (see [`crate::signal::frame_file`])
//! and `manifest.json`, which echoes the generation config and lists every
//! frame's parameters and byte offset.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::BoiEstimate;
use crate::signal::frame_file::{write_frames, FrameReader};
use crate::signal::{synthesize_frame, FrameSpec, IQFrame, ModulationScheme, DEFAULT_FRAME_LENGTH};

pub const FRAMES_FILE: &str = "frames.bin";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub name: String,
    pub frames_per_class: usize,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<ModulationScheme>,
    pub cfo_low: f64,
    pub cfo_high: f64,
    pub t0_min: u16,
    pub t0_max: u16,
    pub beta_min: f64,
    pub beta_max: f64,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub snr_center_db: f64,
    #[serde(default = "default_frame_length")]
    pub frame_length: usize,
    pub master_seed: u64,
}

fn all_schemes() -> Vec<ModulationScheme> {
    ModulationScheme::ALL.to_vec()
}

fn default_frame_length() -> usize {
    DEFAULT_FRAME_LENGTH
}

impl GenerationConfig {
    /// Parameter ranges of the public CSPB.ML.2018 set.
    pub fn ml2018() -> Self {
        GenerationConfig {
            name: "ml2018".into(),
            frames_per_class: 1000,
            schemes: all_schemes(),
            cfo_low: -0.001,
            cfo_high: 0.001,
            t0_min: 1,
            t0_max: 23,
            beta_min: 0.1,
            beta_max: 1.0,
            snr_min_db: 0.0,
            snr_max_db: 12.0,
            snr_center_db: 9.0,
            frame_length: DEFAULT_FRAME_LENGTH,
            master_seed: 2018,
        }
    }

    /// Parameter ranges of the public CSPB.ML.2022 set.
    pub fn ml2022() -> Self {
        GenerationConfig {
            name: "ml2022".into(),
            cfo_low: 0.01,
            cfo_high: 0.02,
            t0_max: 29,
            snr_min_db: 1.0,
            snr_max_db: 18.0,
            snr_center_db: 12.0,
            master_seed: 2022,
            ..Self::ml2018()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("dataset '{}': {m}", self.name)));
        if self.frames_per_class == 0 {
            return bad("frames_per_class must be positive".into());
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        let mut seen = self.schemes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.schemes.len() {
            return bad("duplicate scheme".into());
        }
        if !(self.cfo_low < self.cfo_high) || self.cfo_low <= -0.5 || self.cfo_high >= 0.5 {
            return bad(format!("CFO range ({}, {}) invalid", self.cfo_low, self.cfo_high));
        }
        if self.t0_min == 0 || self.t0_min > self.t0_max {
            return bad(format!("T0 range [{}, {}] invalid", self.t0_min, self.t0_max));
        }
        if !(0.1 <= self.beta_min && self.beta_min <= self.beta_max && self.beta_max <= 1.0) {
            return bad(format!("roll-off range [{}, {}] invalid", self.beta_min, self.beta_max));
        }
        if !(self.snr_min_db <= self.snr_max_db) {
            return bad("SNR range empty".into());
        }
        if !(self.snr_min_db..=self.snr_max_db).contains(&self.snr_center_db) {
            return bad("SNR centre of mass outside the SNR range".into());
        }
        if self.snr_min_db < self.snr_max_db
            && (self.snr_center_db == self.snr_min_db || self.snr_center_db == self.snr_max_db)
        {
            return bad("SNR centre of mass must lie strictly inside the SNR range".into());
        }
        if !self.frame_length.is_power_of_two() {
            return bad(format!("frame length {} not a power of two", self.frame_length));
        }
        let need = crate::signal::srrc::DEFAULT_SPAN_SYMBOLS * self.t0_max as usize;
        if self.frame_length < need {
            return bad(format!(
                "frame length {} shorter than the {need}-sample pulse span at T0 = {}",
                self.frame_length, self.t0_max
            ));
        }
        Ok(())
    }

    pub fn snr_distribution(&self) -> SnrDistribution {
        SnrDistribution::with_mean(self.snr_min_db, self.snr_max_db, self.snr_center_db)
    }

    /// Draws every frame's parameters from the master seed, scheme by scheme.
    pub fn frame_specs(&self) -> Result<Vec<FrameSpec>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        let snr = self.snr_distribution();
        let mut specs = Vec::with_capacity(self.frames_per_class * self.schemes.len());
        for &scheme in &self.schemes {
            for _ in 0..self.frames_per_class {
                let f0 = loop {
                    let f = rng.gen_range(self.cfo_low..self.cfo_high);
                    if f > self.cfo_low {
                        break f;
                    }
                };
                let t0 = rng.gen_range(self.t0_min..=self.t0_max);
                let beta = if self.beta_min == self.beta_max {
                    self.beta_min
                } else {
                    rng.gen_range(self.beta_min..=self.beta_max)
                };
                let snr_db = snr.sample(&mut rng);
                let seed = rng.gen::<u64>();
                specs.push(FrameSpec {
                    scheme,
                    t0,
                    beta: if scheme.is_linear() { beta } else { 0.0 },
                    f0,
                    snr_db,
                    length: self.frame_length,
                    seed,
                });
            }
        }
        Ok(specs)
    }
}

/// Maximum-entropy density on `[low, high]` with a prescribed mean:
/// `p(x) ∝ exp(λ x)`, with λ solved so that `E[x] = mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrDistribution {
    pub low: f64,
    pub high: f64,
    /// Tilt in units of the normalized range.
    pub tilt: f64,
}

fn unit_mean(l: f64) -> f64 {
    if l.abs() < 1e-6 {
        0.5 + l / 12.0
    } else if l > 0.0 {
        1.0 / -(-l).exp_m1() - 1.0 / l
    } else {
        1.0 - unit_mean(-l)
    }
}

impl SnrDistribution {
    pub fn with_mean(low: f64, high: f64, mean: f64) -> Self {
        if high <= low {
            return SnrDistribution { low, high: low, tilt: 0.0 };
        }
        let target = ((mean - low) / (high - low)).clamp(1e-6, 1.0 - 1e-6);
        let (mut a, mut b) = (-1e3, 1e3);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if unit_mean(m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        SnrDistribution { low, high, tilt: 0.5 * (a + b) }
    }

    pub fn mean(&self) -> f64 {
        self.low + (self.high - self.low) * unit_mean(self.tilt)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.high <= self.low {
            return self.low;
        }
        let r: f64 = rng.gen();
        let l = self.tilt;
        let u = if l.abs() < 1e-9 {
            r
        } else if l > 0.0 {
            1.0 + (r + (1.0 - r) * (-l).exp()).ln() / l
        } else {
            (r * l.exp_m1()).ln_1p() / l
        };
        self.low + (self.high - self.low) * u.clamp(0.0, 1.0)
    }
}

/// Blind preprocessing outcome stored with each frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessRecord {
    pub boi: BoiEstimate,
    /// Multiplier that brought the filtered frame to unit total power.
    pub scale_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub scheme: ModulationScheme,
    pub t0: u16,
    /// `None` for MSK, which has no pulse-shaping roll-off.
    pub beta: Option<f64>,
    pub f0: f64,
    pub snr_db: f64,
    pub seed: u64,
    pub offset: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<PreprocessRecord>,
}

impl FrameRecord {
    pub fn from_spec(index: usize, spec: &FrameSpec, offset: u64) -> Self {
        FrameRecord {
            index,
            scheme: spec.scheme,
            t0: spec.t0,
            beta: spec.scheme.is_linear().then_some(spec.beta),
            f0: spec.f0,
            snr_db: spec.snr_db,
            seed: spec.seed,
            offset,
            preprocessing: None,
        }
    }

    pub fn spec(&self, length: usize) -> FrameSpec {
        FrameSpec {
            scheme: self.scheme,
            t0: self.t0,
            beta: self.beta.unwrap_or(0.0),
            f0: self.f0,
            snr_db: self.snr_db,
            length,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub frames_file: String,
    pub frame_length: usize,
    pub frame_count: usize,
    pub preprocessed: bool,
    pub config: GenerationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocess_config: Option<crate::preprocess::PreprocessConfig>,
    pub generation_notes: Vec<String>,
    pub frames: Vec<FrameRecord>,
}

fn generation_notes(config: &GenerationConfig) -> Vec<String> {
    let snr = config.snr_distribution();
    vec![
        format!(
            "SNR drawn from p(x) ~ exp(lambda*x) on [{}, {}] dB, lambda = {:.6} per unit range, mean {:.4} dB",
            config.snr_min_db,
            config.snr_max_db,
            snr.tilt,
            snr.mean()
        ),
        "T0 uniform over the integer range; beta and f0 uniform".into(),
        "symbol timing: uniform fractional delay in [0, T0) samples; carrier phase uniform in [0, 2pi)".into(),
        "one signal per frame, pulse tails from symbols outside the capture included".into(),
        "AWGN white over the full band; in-band SNR referenced to (1+beta)/T0, or 1.18/T0 for MSK".into(),
        "MSK: continuous phase, modulation index 0.5, roll-off not applicable".into(),
    ]
}

/// Frames plus their manifest, held in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub frames: Vec<IQFrame>,
}

impl Dataset {
    /// Synthesizes every frame of `config` in memory (parallel per frame).
    pub fn generate(config: &GenerationConfig) -> Result<Dataset> {
        let specs = config.frame_specs()?;
        let frames = specs
            .par_iter()
            .map(synthesize_frame)
            .collect::<Result<Vec<_>>>()?;
        let n = config.frame_length;
        let records = specs
            .iter()
            .enumerate()
            .map(|(k, s)| {
                FrameRecord::from_spec(k, s, crate::signal::frame_file::frame_offset(n, k))
            })
            .collect();
        Ok(Dataset {
            manifest: DatasetManifest {
                format_version: MANIFEST_VERSION,
                frames_file: FRAMES_FILE.into(),
                frame_length: n,
                frame_count: specs.len(),
                preprocessed: false,
                config: config.clone(),
                preprocess_config: None,
                generation_notes: generation_notes(config),
                frames: records,
            },
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn schemes(&self) -> &[ModulationScheme] {
        &self.manifest.config.schemes
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let offsets = write_frames(
            &dir.join(&self.manifest.frames_file),
            &self.frames,
            self.manifest.preprocessed,
        )?;
        debug_assert!(offsets
            .iter()
            .zip(&self.manifest.frames)
            .all(|(o, r)| *o == r.offset));
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        let frames_path = dir.join(&manifest.frames_file);
        let mut reader = FrameReader::open(&frames_path)?;
        let header = reader.header();
        if header.frame_count as usize != manifest.frame_count
            || header.frame_length as usize != manifest.frame_length
            || header.preprocessed != manifest.preprocessed
        {
            return Err(Error::format(&frames_path, "header disagrees with manifest"));
        }
        let mut frames = reader.read_all()?;
        // The manifest keeps full-precision parameters.
        for (frame, rec) in frames.iter_mut().zip(&manifest.frames) {
            frame.spec = rec.spec(manifest.frame_length);
        }
        Ok(Dataset { manifest, frames })
    }
}

/// Generates `config` and writes it under `dir`.
pub fn generate_dataset(config: &GenerationConfig, dir: &Path) -> Result<DatasetManifest> {
    let ds = Dataset::generate(config)?;
    ds.save(dir)?;
    Ok(ds.manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(base: GenerationConfig) -> GenerationConfig {
        GenerationConfig {
            frames_per_class: 6,
            frame_length: 1024,
            t0_max: 12,
            ..base
        }
    }

    #[test]
    fn cfo_ranges_follow_presets() {
        let a = small(GenerationConfig::ml2018()).frame_specs().unwrap();
        let b = small(GenerationConfig::ml2022()).frame_specs().unwrap();
        assert!(a.iter().all(|s| s.f0 > -0.001 && s.f0 < 0.001));
        assert!(b.iter().all(|s| s.f0 > 0.01 && s.f0 < 0.02));
        let max_a = a.iter().map(|s| s.f0).fold(f64::MIN, f64::max);
        let min_b = b.iter().map(|s| s.f0).fold(f64::MAX, f64::min);
        assert!(max_a < min_b);
    }

    #[test]
    fn snr_mean_matches_centre_of_mass() {
        for (lo, hi, c) in [(0.0, 12.0, 9.0), (1.0, 18.0, 12.0), (8.0, 13.0, 10.5), (0.0, 10.0, 2.0)] {
            let d = SnrDistribution::with_mean(lo, hi, c);
            assert!((d.mean() - c).abs() < 1e-9);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            assert!(xs.iter().all(|x| (lo..=hi).contains(x)));
            let mean = xs.iter().sum::<f64>() / n as f64;
            assert!((mean - c).abs() < 0.05, "{lo}..{hi} centre {c}: {mean}");
        }
    }

    #[test]
    fn per_class_counts_and_ranges() {
        let cfg = small(GenerationConfig::ml2018());
        let specs = cfg.frame_specs().unwrap();
        assert_eq!(specs.len(), 6 * 8);
        for scheme in ModulationScheme::ALL {
            assert_eq!(specs.iter().filter(|s| s.scheme == scheme).count(), 6);
        }
        for s in &specs {
            assert!((cfg.t0_min..=cfg.t0_max).contains(&s.t0));
            assert!((0.0..=12.0).contains(&s.snr_db));
            if s.scheme.is_linear() {
                assert!((0.1..=1.0).contains(&s.beta));
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = small(GenerationConfig::ml2018());
        let cases = [
            GenerationConfig { cfo_low: 0.01, cfo_high: 0.01, ..base.clone() },
            GenerationConfig { t0_min: 5, t0_max: 4, ..base.clone() },
            GenerationConfig { snr_center_db: 13.0, ..base.clone() },
            GenerationConfig { frame_length: 1000, ..base.clone() },
            GenerationConfig { frame_length: 128, ..base.clone() },
            GenerationConfig { beta_min: 0.05, ..base.clone() },
            GenerationConfig { schemes: vec![], ..base.clone() },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn save_load_and_regenerate_identically() {
        let cfg = GenerationConfig { frames_per_class: 2, ..small(GenerationConfig::ml2022()) };
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let m = generate_dataset(&cfg, &a).unwrap();
        generate_dataset(&cfg, &b).unwrap();
        assert_eq!(m.frame_count, 16);
        for f in [FRAMES_FILE, MANIFEST_FILE] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        }
        let ds = Dataset::load(&a).unwrap();
        assert_eq!(ds.manifest, m);
        let msk = ds.manifest.frames.iter().find(|r| r.scheme == ModulationScheme::Msk).unwrap();
        assert_eq!(msk.beta, None);
        let fresh = Dataset::generate(&cfg).unwrap();
        for (x, y) in ds.frames.iter().zip(&fresh.frames) {
            assert_eq!(x.spec, y.spec);
            for (p, q) in x.i.iter().zip(&y.i) {
                assert_eq!(*p, *q as f32 as f64);
            }
        }
    }
}
