//! IQ sample files: a 32-byte header followed by interleaved little-endian
//! `f32` I/Q pairs.
//!
//! Header layout: magic `ZOIQ` (4 bytes), version `u16`, 2 reserved bytes,
//! sample rate `f64` in Hz, sample count `u64`, 8 reserved bytes.

use std::path::{Path, PathBuf};

use zakotfs::Complex64;

pub const MAGIC: [u8; 4] = *b"ZOIQ";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum IqError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("bad magic {found:?} (expected \"ZOIQ\")")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {found} (expected {VERSION})")]
    BadVersion { found: u16 },
    #[error("truncated: need {needed} bytes, have {available} ({} missing)", needed - available)]
    Truncated { needed: u64, available: u64 },
    #[error("header declares {declared} samples but the body holds {actual} bytes ({} samples)", actual / 8)]
    CountMismatch { declared: u64, actual: u64 },
    #[error("invalid sample rate {0}")]
    BadRate(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IqFile {
    pub sample_rate: f64,
    pub samples: Vec<Complex64>,
}

pub fn encode(sample_rate: f64, samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * samples.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&[0; 2]);
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    out.extend_from_slice(&[0; 8]);
    for s in samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<IqFile, IqError> {
    if bytes.len() < HEADER_LEN {
        return Err(IqError::Truncated { needed: HEADER_LEN as u64, available: bytes.len() as u64 });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(IqError::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != VERSION {
        return Err(IqError::BadVersion { found: version });
    }
    let sample_rate = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(IqError::BadRate(sample_rate));
    }
    let declared = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    let needed = declared.checked_mul(8).and_then(|b| b.checked_add(HEADER_LEN as u64)).unwrap_or(u64::MAX);
    if (bytes.len() as u64) < needed {
        return Err(IqError::Truncated { needed, available: bytes.len() as u64 });
    }
    if body.len() as u64 != declared * 8 {
        return Err(IqError::CountMismatch { declared, actual: body.len() as u64 });
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok(IqFile { sample_rate, samples })
}

pub fn write_iq(path: &Path, sample_rate: f64, samples: &[Complex64]) -> Result<(), IqError> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(IqError::BadRate(sample_rate));
    }
    std::fs::write(path, encode(sample_rate, samples)).map_err(|source| IqError::Io { path: path.to_path_buf(), source })
}

pub fn read_iq(path: &Path) -> Result<IqFile, IqError> {
    let bytes = std::fs::read(path).map_err(|source| IqError::Io { path: path.to_path_buf(), source })?;
    decode(&bytes)
}
