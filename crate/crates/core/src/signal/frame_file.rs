//! Little-endian binary container for I/Q frames.
//!
//! ```text
//! header (16 bytes):
//!   magic        "CYCF"
//!   version      u32   low 16 bits = format version, bit 31 = preprocessed
//!   frame_length u32
//!   frame_count  u32
//! per frame:
//!   metadata (32 bytes, packed):
//!     scheme id u8 | T0 u16 | beta f32 (NaN for MSK) | f0 f64 | snr_db f32
//!     | seed u64 | 5 zero bytes
//!   frame_length interleaved (I, Q) f32 pairs
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::modulation::ModulationScheme;
use super::synth::{FrameSpec, IQFrame};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CYCF";
pub const FORMAT_VERSION: u32 = 1;
pub const FLAG_PREPROCESSED: u32 = 1 << 31;
pub const HEADER_BYTES: u64 = 16;
pub const RECORD_BYTES: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileHeader {
    pub version: u32,
    pub preprocessed: bool,
    pub frame_length: u32,
    pub frame_count: u32,
}

impl FileHeader {
    fn encode(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..4].copy_from_slice(MAGIC);
        let word = self.version | if self.preprocessed { FLAG_PREPROCESSED } else { 0 };
        out[4..8].copy_from_slice(&word.to_le_bytes());
        out[8..12].copy_from_slice(&self.frame_length.to_le_bytes());
        out[12..16].copy_from_slice(&self.frame_count.to_le_bytes());
        out
    }

    fn decode(bytes: &[u8; 16], path: &Path) -> Result<Self> {
        if &bytes[..4] != MAGIC {
            return Err(Error::format(path, "bad magic"));
        }
        let word = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let version = word & 0xffff;
        if version != FORMAT_VERSION {
            return Err(Error::format(path, format!("unsupported version {version}")));
        }
        Ok(FileHeader {
            version,
            preprocessed: word & FLAG_PREPROCESSED != 0,
            frame_length: u32::from_le_bytes(bytes[8..12].try_into().unwrap()),
            frame_count: u32::from_le_bytes(bytes[12..16].try_into().unwrap()),
        })
    }
}

/// Byte offset of frame `index`'s metadata record.
pub fn frame_offset(frame_length: usize, index: usize) -> u64 {
    HEADER_BYTES + index as u64 * (RECORD_BYTES + 8 * frame_length as u64)
}

fn encode_record(spec: &FrameSpec) -> [u8; 32] {
    let mut r = [0u8; 32];
    r[0] = spec.scheme.id();
    r[1..3].copy_from_slice(&spec.t0.to_le_bytes());
    let beta = if spec.scheme.is_linear() { spec.beta as f32 } else { f32::NAN };
    r[3..7].copy_from_slice(&beta.to_le_bytes());
    r[7..15].copy_from_slice(&spec.f0.to_le_bytes());
    r[15..19].copy_from_slice(&(spec.snr_db as f32).to_le_bytes());
    r[19..27].copy_from_slice(&spec.seed.to_le_bytes());
    r
}

fn decode_record(r: &[u8; 32], frame_length: usize, path: &Path) -> Result<FrameSpec> {
    let scheme = ModulationScheme::from_id(r[0])
        .ok_or_else(|| Error::format(path, format!("unknown scheme id {}", r[0])))?;
    let beta = f32::from_le_bytes(r[3..7].try_into().unwrap());
    Ok(FrameSpec {
        scheme,
        t0: u16::from_le_bytes(r[1..3].try_into().unwrap()),
        beta: if beta.is_nan() { 0.0 } else { beta as f64 },
        f0: f64::from_le_bytes(r[7..15].try_into().unwrap()),
        snr_db: f32::from_le_bytes(r[15..19].try_into().unwrap()) as f64,
        length: frame_length,
        seed: u64::from_le_bytes(r[19..27].try_into().unwrap()),
    })
}

/// Writes `frames` to `path`, returning each frame's byte offset.
pub fn write_frames(path: &Path, frames: &[IQFrame], preprocessed: bool) -> Result<Vec<u64>> {
    let frame_length = frames.first().map_or(0, |f| f.len());
    if frames.iter().any(|f| f.len() != frame_length || f.q.len() != frame_length) {
        return Err(Error::invalid("all frames in a file must share one length"));
    }
    let header = FileHeader {
        version: FORMAT_VERSION,
        preprocessed,
        frame_length: frame_length as u32,
        frame_count: frames.len() as u32,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(&header.encode()).map_err(io)?;
    let mut offsets = Vec::with_capacity(frames.len());
    let mut buf = Vec::with_capacity(8 * frame_length);
    for (k, frame) in frames.iter().enumerate() {
        offsets.push(frame_offset(frame_length, k));
        w.write_all(&encode_record(&frame.spec)).map_err(io)?;
        buf.clear();
        for (i, q) in frame.i.iter().zip(&frame.q) {
            buf.extend_from_slice(&(*i as f32).to_le_bytes());
            buf.extend_from_slice(&(*q as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(offsets)
}

/// Random-access reader over a frame file.
pub struct FrameReader {
    path: PathBuf,
    reader: BufReader<File>,
    header: FileHeader,
}

impl FrameReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut hdr = [0u8; 16];
        reader.read_exact(&mut hdr).map_err(|e| Error::io(path, e))?;
        let header = FileHeader::decode(&hdr, path)?;
        let expected = frame_offset(header.frame_length as usize, header.frame_count as usize);
        let actual = reader
            .get_ref()
            .metadata()
            .map_err(|e| Error::io(path, e))?
            .len();
        if actual != expected {
            return Err(Error::format(
                path,
                format!("size {actual} bytes, header implies {expected}"),
            ));
        }
        Ok(FrameReader {
            path: path.to_path_buf(),
            reader,
            header,
        })
    }

    pub fn header(&self) -> FileHeader {
        self.header
    }

    pub fn read_frame(&mut self, index: usize) -> Result<IQFrame> {
        if index >= self.header.frame_count as usize {
            return Err(Error::invalid(format!(
                "frame {index} out of range ({} frames)",
                self.header.frame_count
            )));
        }
        let n = self.header.frame_length as usize;
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        self.reader
            .seek(SeekFrom::Start(frame_offset(n, index)))
            .map_err(io)?;
        let mut rec = [0u8; 32];
        self.reader.read_exact(&mut rec).map_err(io)?;
        let spec = decode_record(&rec, n, &self.path)?;
        let mut raw = vec![0u8; 8 * n];
        self.reader.read_exact(&mut raw).map_err(io)?;
        let mut i = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for pair in raw.chunks_exact(8) {
            i.push(f32::from_le_bytes(pair[..4].try_into().unwrap()) as f64);
            q.push(f32::from_le_bytes(pair[4..].try_into().unwrap()) as f64);
        }
        Ok(IQFrame { i, q, spec })
    }

    pub fn read_all(&mut self) -> Result<Vec<IQFrame>> {
        (0..self.header.frame_count as usize)
            .map(|k| self.read_frame(k))
            .collect()
    }
}
