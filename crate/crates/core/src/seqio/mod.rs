//! Image sequences and the on-disk formats the denoiser reads and writes.
//!
//! Samples are held as `f32` on the 8-bit scale `[0, 255]`, laid out
//! frame-major, channel-planar, row-major.

mod flow;
mod pngdir;
mod raw;
mod weights;

use std::path::Path;

pub use flow::{load_flow, save_flow, FlowField, FLOW_SENTINEL};
pub use raw::{RawDtype, RAW_MAGIC, RAW_VERSION};
pub use weights::{load_weights, save_weights, WeightBundle, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use crate::error::{Error, Result};

/// Number of colour planes per frame.
pub const CHANNELS: usize = 3;

/// Smallest supported frame edge.
pub const MIN_EDGE: usize = 8;

/// BT.601 luma weights for R, G, B.
pub const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    frames: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Sequence {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if frames == 0 {
            return Err(Error::DimMismatch("sequence needs at least one frame".into()));
        }
        if height < MIN_EDGE || width < MIN_EDGE {
            return Err(Error::DimMismatch(format!(
                "frames must be at least {MIN_EDGE}x{MIN_EDGE}, got {width}x{height}"
            )));
        }
        let want = frames * CHANNELS * height * width;
        if data.len() != want {
            return Err(Error::DimMismatch(format!(
                "payload has {} samples, expected {want}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite sample".into()));
        }
        Ok(Self {
            frames,
            height,
            width,
            data,
        })
    }

    pub fn filled(frames: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(frames, height, width, vec![value; frames * CHANNELS * height * width])
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frame_len(&self) -> usize {
        CHANNELS * self.height * self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f32] {
        let n = self.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn plane(&self, t: usize, c: usize) -> &[f32] {
        let n = self.plane_len();
        let start = t * self.frame_len() + c * n;
        &self.data[start..start + n]
    }

    #[inline]
    pub fn at(&self, t: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[((t * CHANNELS + c) * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &Sequence) -> bool {
        self.frames == other.frames && self.height == other.height && self.width == other.width
    }

    /// BT.601 luma replicated into all three planes.
    pub fn to_luma(&self) -> Sequence {
        let n = self.plane_len();
        let mut data = vec![0.0f32; self.data.len()];
        for t in 0..self.frames {
            let src = self.frame(t);
            let dst = &mut data[t * self.frame_len()..(t + 1) * self.frame_len()];
            for i in 0..n {
                let y = LUMA[0] * src[i] + LUMA[1] * src[n + i] + LUMA[2] * src[2 * n + i];
                dst[i] = y;
                dst[n + i] = y;
                dst[2 * n + i] = y;
            }
        }
        Sequence {
            frames: self.frames,
            height: self.height,
            width: self.width,
            data,
        }
    }
}

/// On-disk sequence representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqFormat {
    /// Directory of 8-bit RGB PNG files, ordered lexicographically.
    PngDir,
    /// Single `V4DS` file. The dtype only matters when writing.
    Raw(RawDtype),
}

impl SeqFormat {
    /// Existing directories and extension-less paths are PNG sequences,
    /// anything else is a raw file.
    pub fn guess(path: &Path, dtype: RawDtype) -> Self {
        if path.is_dir() || (path.extension().is_none() && !path.is_file()) {
            SeqFormat::PngDir
        } else {
            SeqFormat::Raw(dtype)
        }
    }
}

pub fn read_sequence(path: impl AsRef<Path>, format: SeqFormat) -> Result<Sequence> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    match format {
        SeqFormat::PngDir => pngdir::read(path),
        SeqFormat::Raw(_) => raw::read(path),
    }
}

/// Writes a sequence. 8-bit outputs clamp to `[0, 255]` and round half away
/// from zero; `f32` raw output is bit-exact.
pub fn write_sequence(seq: &Sequence, path: impl AsRef<Path>, format: SeqFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        SeqFormat::PngDir => pngdir::write(seq, path),
        SeqFormat::Raw(dtype) => raw::write(seq, path, dtype),
    }
}

#[inline]
pub fn quantize_u8(v: f32) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}
