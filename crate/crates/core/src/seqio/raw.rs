//! `V4DS` raw sequence files.
//!
//! Layout (little-endian): magic `V4DS`, version u32, F, C, H, W as u32,
//! dtype u8 (0 = u8, 1 = f32), then the payload frame-major, channel-planar,
//! row-major.

use std::fs;
use std::path::Path;

use super::{quantize_u8, Sequence, CHANNELS};
use crate::error::{Error, Result};

pub const RAW_MAGIC: &[u8; 4] = b"V4DS";
pub const RAW_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 16 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RawDtype {
    U8,
    #[default]
    F32,
}

impl RawDtype {
    fn code(self) -> u8 {
        match self {
            RawDtype::U8 => 0,
            RawDtype::F32 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(RawDtype::U8),
            1 => Ok(RawDtype::F32),
            other => Err(Error::Format(format!("unknown raw dtype {other}"))),
        }
    }

    fn size(self) -> usize {
        match self {
            RawDtype::U8 => 1,
            RawDtype::F32 => 4,
        }
    }
}

pub(crate) fn encode(seq: &Sequence, dtype: RawDtype) -> Vec<u8> {
    let n = seq.data().len();
    let mut out = Vec::with_capacity(HEADER_LEN + n * dtype.size());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&RAW_VERSION.to_le_bytes());
    for d in [seq.frames(), CHANNELS, seq.height(), seq.width()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(dtype.code());
    match dtype {
        RawDtype::U8 => out.extend(seq.data().iter().map(|&v| quantize_u8(v))),
        RawDtype::F32 => {
            for v in seq.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Sequence> {
    if bytes.len() < 4 || &bytes[..4] != RAW_MAGIC {
        return Err(Error::BadMagic { expected: "V4DS" });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            what: "raw header",
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version > RAW_VERSION || version == 0 {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: RAW_VERSION,
        });
    }
    let (f, c, h, w) = (word(1) as usize, word(2) as usize, word(3) as usize, word(4) as usize);
    if c != CHANNELS {
        return Err(Error::Format(format!("expected {CHANNELS} channels, header says {c}")));
    }
    let dtype = RawDtype::from_code(bytes[HEADER_LEN - 1])?;
    let count = f
        .checked_mul(c)
        .and_then(|v| v.checked_mul(h))
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Format("header dims overflow".into()))?;
    let expected = count * dtype.size();
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Truncated {
            what: "raw payload",
            expected,
            found: payload.len(),
        });
    }
    let data = match dtype {
        RawDtype::U8 => payload.iter().map(|&b| f32::from(b)).collect(),
        RawDtype::F32 => payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    };
    Sequence::new(f, h, w, data)
}

pub(super) fn read(path: &Path) -> Result<Sequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(super) fn write(seq: &Sequence, path: &Path, dtype: RawDtype) -> Result<()> {
    fs::write(path, encode(seq, dtype)).map_err(|e| Error::io(path, e))
}
