use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::seqio::{Sequence, CHANNELS};

/// `taps` RGB frames centred on a target frame. Taps past either end of the
/// sequence replicate the first/last frame.
#[derive(Debug, Clone)]
pub struct FrameBuffer<'a> {
    frames: Vec<Cow<'a, [f32]>>,
    sources: Vec<usize>,
    height: usize,
    width: usize,
}

/// Source frame index for each tap around `t`.
pub fn tap_sources(frames: usize, t: usize, taps: usize) -> Vec<usize> {
    let half = (taps / 2) as isize;
    (0..taps as isize)
        .map(|k| (t as isize + k - half).clamp(0, frames as isize - 1) as usize)
        .collect()
}

impl<'a> FrameBuffer<'a> {
    pub fn new(seq: &'a Sequence, t: usize, taps: usize) -> Result<Self> {
        if t >= seq.frames() {
            return Err(Error::Config(format!(
                "frame {t} out of range for {} frames",
                seq.frames()
            )));
        }
        if taps.is_multiple_of(2) {
            return Err(Error::Config(format!("temporal taps must be odd, got {taps}")));
        }
        let sources = tap_sources(seq.frames(), t, taps);
        Ok(Self {
            frames: sources.iter().map(|&s| Cow::Borrowed(seq.frame(s))).collect(),
            sources,
            height: seq.height(),
            width: seq.width(),
        })
    }

    /// Builds a buffer from explicit frames (each 3×H×W).
    pub fn from_frames(frames: Vec<Cow<'a, [f32]>>, sources: Vec<usize>, height: usize, width: usize) -> Result<Self> {
        if frames.is_empty() || frames.len().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "buffer needs an odd tap count, got {}",
                frames.len()
            )));
        }
        if frames.iter().any(|f| f.len() != CHANNELS * height * width) {
            return Err(Error::DimMismatch("buffer frame size differs from target".into()));
        }
        Ok(Self {
            frames,
            sources,
            height,
            width,
        })
    }

    pub fn taps(&self) -> usize {
        self.frames.len()
    }

    pub fn centre(&self) -> usize {
        self.frames.len() / 2
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Sequence frame index each tap was taken from.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn tap(&self, k: usize) -> &[f32] {
        &self.frames[k]
    }

    /// Copies the T×C×B×B block at `(y0, x0)` into `out` as f64.
    pub fn extract(&self, y0: usize, x0: usize, block: usize, out: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        let mut i = 0;
        for frame in &self.frames {
            for c in 0..CHANNELS {
                let plane = &frame[c * h * w..(c + 1) * h * w];
                for y in y0..y0 + block {
                    let row = &plane[y * w + x0..y * w + x0 + block];
                    for (o, &v) in out[i..i + block].iter_mut().zip(row) {
                        *o = f64::from(v);
                    }
                    i += block;
                }
            }
        }
    }
}
