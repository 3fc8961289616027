//! Baseband waveform generation: symbol mapping, pulse shaping, impairments
//! and the on-disk frame container.

pub mod frame_file;
pub mod modulation;
pub mod srrc;
pub mod synth;

pub use frame_file::{write_frames, FileHeader, FrameReader};
pub use modulation::{map_symbols, ModulationScheme};
pub use srrc::{srrc_pulse, srrc_taps, DEFAULT_SPAN_SYMBOLS};
pub use synth::{synthesize_frame, FrameSpec, IQFrame, DEFAULT_FRAME_LENGTH, MSK_99_BANDWIDTH};
