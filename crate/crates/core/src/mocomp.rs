//! Motion-compensated frame buffers from precomputed optical flow.

use std::borrow::Cow;
use std::path::{Path, PathBuf};

use crate::engine::{tap_sources, FrameBuffer};
use crate::error::{Error, Result};
use crate::seqio::{load_flow, FlowField, Sequence, CHANNELS};

/// Flow directory with one `t{t}_n{k}.flo` per (target, neighbour) pair.
/// The flow maps target pixels into the neighbour frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpSpec {
    dir: PathBuf,
}

impl WarpSpec {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn flow_path(&self, target: usize, neighbour: usize) -> PathBuf {
        self.dir.join(format!("t{target}_n{neighbour}.flo"))
    }
}

/// Bilinear sample of every plane at `(x + u, y + v)`, coordinates clamped to
/// the frame.
pub fn warp_frame(frame: &[f32], height: usize, width: usize, flow: &FlowField) -> Result<Vec<f32>> {
    if frame.len() != CHANNELS * height * width {
        return Err(Error::DimMismatch(format!(
            "frame has {} samples, expected 3x{height}x{width}",
            frame.len()
        )));
    }
    if flow.height() != height || flow.width() != width {
        return Err(Error::DimMismatch(format!(
            "flow is {}x{}, frame is {width}x{height}",
            flow.width(),
            flow.height()
        )));
    }
    let plane = height * width;
    let mut out = vec![0.0f32; frame.len()];
    let (xmax, ymax) = ((width - 1) as f32, (height - 1) as f32);
    for y in 0..height {
        for x in 0..width {
            let [u, v] = flow.at(y, x);
            let sx = (x as f32 + u).clamp(0.0, xmax);
            let sy = (y as f32 + v).clamp(0.0, ymax);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
            let (fx, fy) = (sx - x0 as f32, sy - y0 as f32);
            for c in 0..CHANNELS {
                let p = &frame[c * plane..(c + 1) * plane];
                let top = p[y0 * width + x0] * (1.0 - fx) + p[y0 * width + x1] * fx;
                let bot = p[y1 * width + x0] * (1.0 - fx) + p[y1 * width + x1] * fx;
                out[c * plane + y * width + x] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    Ok(out)
}

/// Frame buffer around `t` with every neighbour warped toward `t`. Taps that
/// replicate `t` itself at a sequence boundary are left untouched.
pub fn build_buffer_mc<'a>(seq: &'a Sequence, t: usize, taps: usize, spec: &WarpSpec) -> Result<FrameBuffer<'a>> {
    if t >= seq.frames() {
        return Err(Error::Config(format!("frame {t} out of range")));
    }
    let sources = tap_sources(seq.frames(), t, taps);
    let mut frames = Vec::with_capacity(taps);
    for &k in &sources {
        if k == t {
            frames.push(Cow::Borrowed(seq.frame(k)));
        } else {
            let flow = load_flow(spec.flow_path(t, k))?;
            let warped = warp_frame(seq.frame(k), seq.height(), seq.width(), &flow)?;
            frames.push(Cow::Owned(warped));
        }
    }
    FrameBuffer::from_frames(frames, sources, seq.height(), seq.width())
}
