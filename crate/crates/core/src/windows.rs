//! Analysis/synthesis window pairs and overlap-add normalization maps.
//!
//! Windows are B×B spatial profiles; every temporal tap and colour plane of a
//! block uses the same profile.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::seqio::WeightBundle;

/// Entries below this fraction of the peak are raised to it.
pub const POSITIVITY_FLOOR: f64 = 1e-3;

pub const ANALYSIS_TENSOR: &str = "window.analysis";
pub const SYNTHESIS_TENSOR: &str = "window.synthesis";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowShape {
    Cosine,
    Gaussian,
    Trained,
}

impl FromStr for WindowShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(WindowShape::Cosine),
            "gaussian" => Ok(WindowShape::Gaussian),
            "trained" => Ok(WindowShape::Trained),
            other => Err(Error::Config(format!("unknown window shape {other:?}"))),
        }
    }
}

impl fmt::Display for WindowShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowShape::Cosine => "cosine",
            WindowShape::Gaussian => "gaussian",
            WindowShape::Trained => "trained",
        })
    }
}

/// Gaussian decay giving a standard deviation of B/4.
pub fn default_alpha(block: usize) -> f64 {
    8.0 / (block * block) as f64
}

/// Periodic raised cosine `0.5 - 0.5 cos(2π(n + 0.5)/B)`, unnormalized.
pub fn raised_cosine(block: usize) -> Vec<f64> {
    let b = block as f64;
    (0..block)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (n as f64 + 0.5) / b).cos())
        .collect()
}

/// Half-cosine `sin(π(n + 0.5)/B)`; its square is [`raised_cosine`].
pub fn half_cosine(block: usize) -> Vec<f64> {
    let b = block as f64;
    (0..block)
        .map(|n| (std::f64::consts::PI * (n as f64 + 0.5) / b).sin())
        .collect()
}

fn gaussian(block: usize, alpha: f64) -> Vec<f64> {
    let c = (block as f64 - 1.0) / 2.0;
    let mut w = Vec::with_capacity(block * block);
    for h in 0..block {
        for k in 0..block {
            let (dh, dk) = (h as f64 - c, k as f64 - c);
            w.push((-alpha * (dh * dh + dk * dk)).exp());
        }
    }
    w
}

fn separable(profile: &[f64]) -> Vec<f64> {
    profile
        .iter()
        .flat_map(|a| profile.iter().map(move |b| a * b))
        .collect()
}

/// Peak-normalizes and applies the positivity floor.
fn finish(mut w: Vec<f64>, name: &str) -> Result<Vec<f64>> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format(format!("{name} has non-finite entries")));
    }
    let peak = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak <= 0.0 {
        return Err(Error::Format(format!("{name} has no positive entries")));
    }
    for v in &mut w {
        *v = (*v / peak).max(POSITIVITY_FLOOR);
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowPair {
    shape: WindowShape,
    block: usize,
    analysis: Vec<f64>,
    synthesis: Vec<f64>,
    alpha_a: Option<f64>,
    alpha_s: Option<f64>,
}

impl WindowPair {
    /// Builds a pair. `alpha` only applies to Gaussian windows (default
    /// [`default_alpha`]); trained windows come from `bundle`.
    pub fn new(shape: WindowShape, block: usize, alpha: Option<f64>, bundle: Option<&WeightBundle>) -> Result<Self> {
        if block < 4 {
            return Err(Error::Config(format!("block size {block} < 4")));
        }
        let (analysis, synthesis, alpha_a, alpha_s) = match shape {
            WindowShape::Cosine => {
                let w = separable(&raised_cosine(block));
                (w.clone(), w, None, None)
            }
            WindowShape::Gaussian => {
                let a = alpha.unwrap_or_else(|| default_alpha(block));
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::Config(format!("gaussian alpha must be positive, got {a}")));
                }
                let w = gaussian(block, a);
                (w.clone(), w, Some(a), Some(a))
            }
            WindowShape::Trained => {
                let bundle = bundle.ok_or_else(|| Error::Config("trained windows need a weight bundle".into()))?;
                let load = |name: &str| -> Result<Vec<f64>> {
                    let t = bundle.require(name)?;
                    if t.dims() != [block, block] {
                        return Err(Error::DimMismatch(format!(
                            "{name} has dims {:?}, expected [{block}, {block}]",
                            t.dims()
                        )));
                    }
                    Ok(t.data().iter().map(|&v| f64::from(v)).collect())
                };
                (load(ANALYSIS_TENSOR)?, load(SYNTHESIS_TENSOR)?, None, None)
            }
        };
        Ok(Self {
            shape,
            block,
            analysis: finish(analysis, "analysis window")?,
            synthesis: finish(synthesis, "synthesis window")?,
            alpha_a,
            alpha_s,
        })
    }

    /// A pair from explicit B×B profiles (peak-normalized and floored).
    pub fn from_profiles(block: usize, analysis: Vec<f64>, synthesis: Vec<f64>) -> Result<Self> {
        if analysis.len() != block * block || synthesis.len() != block * block {
            return Err(Error::DimMismatch(format!("window profiles must be {block}x{block}")));
        }
        Ok(Self {
            shape: WindowShape::Trained,
            block,
            analysis: finish(analysis, "analysis window")?,
            synthesis: finish(synthesis, "synthesis window")?,
            alpha_a: None,
            alpha_s: None,
        })
    }

    pub fn shape(&self) -> WindowShape {
        self.shape
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn analysis(&self) -> &[f64] {
        &self.analysis
    }

    pub fn synthesis(&self) -> &[f64] {
        &self.synthesis
    }

    pub fn alphas(&self) -> (Option<f64>, Option<f64>) {
        (self.alpha_a, self.alpha_s)
    }

    /// Σ w_a² over one B×B slice.
    pub fn analysis_energy(&self) -> f64 {
        self.analysis.iter().map(|v| v * v).sum()
    }

    /// w_s ⊙ w_a.
    pub fn combined(&self) -> Vec<f64> {
        self.analysis.iter().zip(&self.synthesis).map(|(a, s)| a * s).collect()
    }
}

/// Block origins along one axis: `0, s, 2s, …` with the last one clamped to
/// `extent - block`.
pub fn block_positions(extent: usize, block: usize, stride: usize) -> Vec<usize> {
    assert!(block <= extent && stride >= 1);
    let last = extent - block;
    let mut p: Vec<usize> = (0..=last).step_by(stride).collect();
    if *p.last().unwrap() != last {
        p.push(last);
    }
    p
}

/// Number of blocks processed per frame.
pub fn block_count(height: usize, width: usize, block: usize, stride: usize) -> usize {
    block_positions(height, block, stride).len() * block_positions(width, block, stride).len()
}

/// Frame borders touched by a block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Border {
    pub top: bool,
    pub bottom: bool,
    pub left: bool,
    pub right: bool,
}

impl Border {
    pub fn of(y0: usize, x0: usize, block: usize, height: usize, width: usize) -> Self {
        Self {
            top: y0 == 0,
            bottom: y0 + block == height,
            left: x0 == 0,
            right: x0 + block == width,
        }
    }

    fn index(self) -> usize {
        self.top as usize | (self.bottom as usize) << 1 | (self.left as usize) << 2 | (self.right as usize) << 3
    }

    fn from_index(i: usize) -> Self {
        Self {
            top: i & 1 != 0,
            bottom: i & 2 != 0,
            left: i & 4 != 0,
            right: i & 8 != 0,
        }
    }
}

/// Holds the half of `w` that faces each touched border at the value of the
/// adjacent central row or column.
fn flatten_toward(w: &[f64], block: usize, border: Border) -> Vec<f64> {
    let (lo, hi) = (block / 2 - 1, block / 2);
    let pick = |i: usize, low: bool, high: bool| {
        if low && i < lo {
            lo
        } else if high && i > hi {
            hi
        } else {
            i
        }
    };
    let mut out = Vec::with_capacity(w.len());
    for h in 0..block {
        let hh = pick(h, border.top, border.bottom);
        for k in 0..block {
            out.push(w[hh * block + pick(k, border.left, border.right)]);
        }
    }
    out
}

/// Window pair for every block placement. With flat borders, blocks touching
/// the frame edge use windows that do not taper toward that edge, so border
/// pixels are not reconstructed from the low-weight rim of a single block.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementWindows {
    flat_borders: bool,
    variants: Vec<WindowPair>,
}

impl PlacementWindows {
    pub fn new(pair: &WindowPair, flat_borders: bool) -> Self {
        let variants = if flat_borders {
            (0..16)
                .map(|i| {
                    let border = Border::from_index(i);
                    let b = pair.block;
                    WindowPair {
                        analysis: flatten_toward(&pair.analysis, b, border),
                        synthesis: flatten_toward(&pair.synthesis, b, border),
                        ..pair.clone()
                    }
                })
                .collect()
        } else {
            vec![pair.clone()]
        };
        Self { flat_borders, variants }
    }

    pub fn flat_borders(&self) -> bool {
        self.flat_borders
    }

    /// The interior (untouched) pair.
    pub fn interior(&self) -> &WindowPair {
        &self.variants[0]
    }

    pub fn block(&self) -> usize {
        self.variants[0].block
    }

    pub fn get(&self, border: Border) -> &WindowPair {
        if self.flat_borders {
            &self.variants[border.index()]
        } else {
            &self.variants[0]
        }
    }

    pub fn for_block(&self, y0: usize, x0: usize, height: usize, width: usize) -> &WindowPair {
        self.get(Border::of(y0, x0, self.block(), height, width))
    }
}

/// Accumulated `w_s ⊙ w_a` over every block placement of one frame plane.
#[derive(Debug, Clone, PartialEq)]
pub struct NormMap {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl NormMap {
    /// Map for the same pair at every placement.
    pub fn new(pair: &WindowPair, height: usize, width: usize, stride: usize) -> Result<Self> {
        Self::for_placements(&PlacementWindows::new(pair, false), height, width, stride)
    }

    pub fn for_placements(windows: &PlacementWindows, height: usize, width: usize, stride: usize) -> Result<Self> {
        let b = windows.block();
        if stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if b > height || b > width {
            return Err(Error::Config(format!(
                "block {b} does not fit a {width}x{height} frame"
            )));
        }
        let mut weights = vec![0.0f64; height * width];
        let xs = block_positions(width, b, stride);
        for &y0 in &block_positions(height, b, stride) {
            for &x0 in &xs {
                let combined = windows.for_block(y0, x0, height, width).combined();
                for h in 0..b {
                    let row = &mut weights[(y0 + h) * width + x0..(y0 + h) * width + x0 + b];
                    for (dst, w) in row.iter_mut().zip(&combined[h * b..(h + 1) * b]) {
                        *dst += w;
                    }
                }
            }
        }
        if let Some(i) = weights.iter().position(|&w| w < 1e-6) {
            return Err(Error::Format(format!(
                "pixel ({}, {}) is not covered by any block",
                i % width,
                i / width
            )));
        }
        Ok(Self { height, width, weights })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}
