//! Constellations and bit-to-symbol mapping for the eight supported schemes.
//!
//! Linear schemes map onto unit-average-energy constellations with Gray
//! labelling. π/4-DQPSK is differentially encoded: every symbol advances the
//! carrier phase by π/4 plus a Gray-coded multiple of π/2. MSK yields ±1
//! frequency symbols that the CPM path integrates into phase.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModulationScheme {
    Bpsk,
    Qpsk,
    #[serde(rename = "8PSK", alias = "PSK8")]
    Psk8,
    DqpskPi4,
    Msk,
    Qam16,
    Qam64,
    Qam256,
}

impl ModulationScheme {
    pub const ALL: [ModulationScheme; 8] = [
        ModulationScheme::Bpsk,
        ModulationScheme::Qpsk,
        ModulationScheme::Psk8,
        ModulationScheme::DqpskPi4,
        ModulationScheme::Msk,
        ModulationScheme::Qam16,
        ModulationScheme::Qam64,
        ModulationScheme::Qam256,
    ];

    /// Stable numeric id used by the binary frame format.
    pub fn id(self) -> u8 {
        match self {
            ModulationScheme::Bpsk => 0,
            ModulationScheme::Qpsk => 1,
            ModulationScheme::Psk8 => 2,
            ModulationScheme::DqpskPi4 => 3,
            ModulationScheme::Msk => 4,
            ModulationScheme::Qam16 => 5,
            ModulationScheme::Qam64 => 6,
            ModulationScheme::Qam256 => 7,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModulationScheme::Bpsk | ModulationScheme::Msk => 1,
            ModulationScheme::Qpsk | ModulationScheme::DqpskPi4 => 2,
            ModulationScheme::Psk8 => 3,
            ModulationScheme::Qam16 => 4,
            ModulationScheme::Qam64 => 6,
            ModulationScheme::Qam256 => 8,
        }
    }

    pub fn is_qam(self) -> bool {
        matches!(
            self,
            ModulationScheme::Qam16 | ModulationScheme::Qam64 | ModulationScheme::Qam256
        )
    }

    /// True for schemes built from SRRC-shaped complex symbols.
    pub fn is_linear(self) -> bool {
        self != ModulationScheme::Msk
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationScheme::Bpsk => "BPSK",
            ModulationScheme::Qpsk => "QPSK",
            ModulationScheme::Psk8 => "8PSK",
            ModulationScheme::DqpskPi4 => "DQPSK_PI4",
            ModulationScheme::Msk => "MSK",
            ModulationScheme::Qam16 => "QAM16",
            ModulationScheme::Qam64 => "QAM64",
            ModulationScheme::Qam256 => "QAM256",
        }
    }

    /// The reference constellation, indexed by the symbol's bit value.
    /// Differential and CPM schemes have no fixed constellation.
    pub fn constellation(self) -> Option<Vec<Complex64>> {
        match self {
            ModulationScheme::DqpskPi4 | ModulationScheme::Msk => None,
            _ => {
                let m = 1usize << self.bits_per_symbol();
                Some((0..m).map(|v| self.point(v as u32)).collect())
            }
        }
    }

    fn point(self, value: u32) -> Complex64 {
        match self {
            ModulationScheme::Bpsk => {
                if value == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
            ModulationScheme::Qpsk => {
                let i = if value & 0b10 == 0 { 1.0 } else { -1.0 };
                let q = if value & 0b01 == 0 { 1.0 } else { -1.0 };
                Complex64::new(i, q) / 2f64.sqrt()
            }
            ModulationScheme::Psk8 => {
                let k = gray_decode(value);
                Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 8.0)
            }
            ModulationScheme::Qam16 => qam_point(value, 2),
            ModulationScheme::Qam64 => qam_point(value, 3),
            ModulationScheme::Qam256 => qam_point(value, 4),
            ModulationScheme::DqpskPi4 | ModulationScheme::Msk => {
                unreachable!("no fixed constellation")
            }
        }
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '/'], "_");
        let scheme = match norm.as_str() {
            "BPSK" => ModulationScheme::Bpsk,
            "QPSK" => ModulationScheme::Qpsk,
            "8PSK" | "PSK8" | "8_PSK" => ModulationScheme::Psk8,
            "DQPSK_PI4" | "PI4_DQPSK" | "PI_4_DQPSK" => ModulationScheme::DqpskPi4,
            "MSK" => ModulationScheme::Msk,
            "QAM16" | "16QAM" | "16_QAM" => ModulationScheme::Qam16,
            "QAM64" | "64QAM" | "64_QAM" => ModulationScheme::Qam64,
            "QAM256" | "256QAM" | "256_QAM" => ModulationScheme::Qam256,
            _ => return Err(Error::invalid(format!("unknown modulation scheme '{s}'"))),
        };
        Ok(scheme)
    }
}

fn gray_decode(mut g: u32) -> u32 {
    let mut v = g;
    while g > 0 {
        g >>= 1;
        v ^= g;
    }
    v
}

/// Square QAM with `axis_bits` bits per rail, levels {±1, ±3, ...} scaled
/// so the average symbol energy is one.
fn qam_point(value: u32, axis_bits: u32) -> Complex64 {
    let levels = 1u32 << axis_bits;
    let mask = levels - 1;
    let level = |bits: u32| 2.0 * gray_decode(bits) as f64 - (levels - 1) as f64;
    let i = level((value >> axis_bits) & mask);
    let q = level(value & mask);
    let m = (levels * levels) as f64;
    let norm = (2.0 * (m - 1.0) / 3.0).sqrt();
    Complex64::new(i, q) / norm
}

/// Maps a bit stream (one `0`/`1` per element, MSB first within a symbol)
/// onto complex symbols.
///
/// MSK returns real ±1 frequency symbols; π/4-DQPSK starts from a zero
/// reference phase.
pub fn map_symbols(scheme: ModulationScheme, bits: &[u8]) -> Result<Vec<Complex64>> {
    let bps = scheme.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(Error::invalid(format!(
            "{} bits is not a multiple of {bps} bits per {scheme} symbol",
            bits.len()
        )));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::invalid(format!("bit value {b} is not 0 or 1")));
    }
    let values = bits.chunks_exact(bps).map(|chunk| {
        chunk
            .iter()
            .fold(0u32, |acc, &b| (acc << 1) | u32::from(b))
    });
    let symbols = match scheme {
        ModulationScheme::Msk => values
            .map(|v| Complex64::new(if v == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect(),
        ModulationScheme::DqpskPi4 => {
            let mut phase = 0.0f64;
            values
                .map(|v| {
                    phase += FRAC_PI_4 + dqpsk_step(v);
                    phase = phase.rem_euclid(2.0 * PI);
                    Complex64::from_polar(1.0, phase)
                })
                .collect()
        }
        _ => values.map(|v| scheme.point(v)).collect(),
    };
    Ok(symbols)
}

/// Gray-coded quadrant step for π/4-DQPSK, added on top of the fixed π/4.
pub fn dqpsk_step(value: u32) -> f64 {
    match value & 0b11 {
        0b00 => 0.0,
        0b01 => FRAC_PI_2,
        0b11 => PI,
        _ => 3.0 * FRAC_PI_2,
    }
}
