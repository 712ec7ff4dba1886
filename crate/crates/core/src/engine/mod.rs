//! Denoising pipelines: the 4-D Wiener filter (classic or net-refined
//! coring, optionally blind), the grayscale 3-D baseline, and multi-scale
//! averaging.

mod baseline;
mod buffer;
mod pipeline;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

pub use baseline::denoise_baseline3d;
pub use buffer::{tap_sources, FrameBuffer};
pub use pipeline::{blind_sigma, Denoiser};

use crate::error::{Error, Result};
use crate::seqio::{Sequence, WeightBundle};
use crate::spectral::DcMode;
use crate::windows::WindowShape;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// Known standard deviation on the 8-bit scale.
    Sigma(f64),
    /// Per-pixel STD map estimated by the noise net.
    Blind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Wiener coring gains as computed.
    Classic,
    /// Gains refined by the coring net.
    Refined,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(Mode::Classic),
            "refined" => Ok(Mode::Refined),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Classic => "classic",
            Mode::Refined => "refined",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Block edge B, a power of two.
    pub block: usize,
    /// Stride divisor d; stride = max(1, B / d).
    pub stride_div: usize,
    /// Temporal taps T (odd).
    pub taps: usize,
    pub window: WindowShape,
    /// Gaussian decay; `None` picks the default for B.
    pub alpha: Option<f64>,
    /// Blocks on the frame edge use windows that stay flat toward it.
    pub flat_borders: bool,
    pub dc: DcMode,
    pub noise: NoiseSpec,
    pub mode: Mode,
    /// Clamp refined gains to [0, 1] before applying them.
    pub clamp_refined: bool,
    /// Block sizes for multi-scale averaging; empty or one entry means
    /// single scale at `block`.
    pub scales: Vec<usize>,
    /// Per-scale averaging weights; uniform when `None`.
    pub scale_weights: Option<Vec<f64>>,
    /// Directory of `t{t}_n{k}.flo` files for motion compensation.
    pub flows: Option<PathBuf>,
    /// Worker count; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            block: 16,
            stride_div: 3,
            taps: 5,
            window: WindowShape::Gaussian,
            alpha: None,
            flat_borders: true,
            dc: DcMode::Median,
            noise: NoiseSpec::Sigma(20.0),
            mode: Mode::Classic,
            clamp_refined: false,
            scales: Vec::new(),
            scale_weights: None,
            flows: None,
            threads: None,
        }
    }
}

impl EngineConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            noise: NoiseSpec::Sigma(sigma),
            ..Self::default()
        }
    }

    pub fn stride(&self) -> usize {
        (self.block / self.stride_div.max(1)).max(1)
    }

    /// Checks everything that does not depend on the input sequence.
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 || self.taps.is_multiple_of(2) {
            return Err(Error::Config(format!("temporal taps must be odd, got {}", self.taps)));
        }
        if !(2..=8).contains(&self.stride_div) {
            return Err(Error::Config(format!(
                "stride divisor must be in [2, 8], got {}",
                self.stride_div
            )));
        }
        for &b in std::iter::once(&self.block).chain(&self.scales) {
            if b < 4 || !b.is_power_of_two() {
                return Err(Error::Config(format!(
                    "block size must be a power of two >= 4, got {b}"
                )));
            }
        }
        if let NoiseSpec::Sigma(s) = self.noise {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::Config(format!("sigma must be >= 0, got {s}")));
            }
        }
        if let Some(w) = &self.scale_weights {
            if self.scales.len() < 2 {
                return Err(Error::Config("scale weights need at least two scales".into()));
            }
            if w.len() != self.scales.len() {
                return Err(Error::Config(format!(
                    "{} weights for {} scales",
                    w.len(),
                    self.scales.len()
                )));
            }
            let sum: f64 = w.iter().sum();
            if w.iter().any(|v| !v.is_finite()) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Config(format!("scale weights must sum to 1, got {sum}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_multiscale(&self) -> bool {
        self.scales.len() >= 2
    }
}

/// Result of one denoising run.
#[derive(Debug, Clone)]
pub struct Denoised {
    pub sequence: Sequence,
    /// Wall-clock time spent on each frame (summed over scales).
    pub frame_times: Vec<Duration>,
    /// Blocks filtered per frame (summed over scales).
    pub blocks_per_frame: usize,
    pub total: Duration,
}

/// Runs `f` on a pool of `threads` workers, or the global pool.
pub(crate) fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Single- or multi-scale 4-D Wiener denoising.
pub fn denoise_sequence(
    seq: &Sequence,
    cfg: &EngineConfig,
    bundle: Option<&WeightBundle>,
    clean: Option<&Sequence>,
) -> Result<Sequence> {
    run(seq, cfg, bundle, clean).map(|d| d.sequence)
}

/// Like [`denoise_sequence`] but also reports timing.
pub fn run(
    seq: &Sequence,
    cfg: &EngineConfig,
    bundle: Option<&WeightBundle>,
    clean: Option<&Sequence>,
) -> Result<Denoised> {
    if cfg.is_multiscale() {
        let weights = cfg
            .scale_weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / cfg.scales.len() as f64; cfg.scales.len()]);
        denoise_multiscale(seq, cfg, &weights, bundle, clean)
    } else {
        Denoiser::new(cfg.clone(), bundle)?.run(seq, clean)
    }
}

/// Weighted per-pixel average of single-scale outputs at each of
/// `cfg.scales`.
pub fn denoise_multiscale(
    seq: &Sequence,
    cfg: &EngineConfig,
    weights: &[f64],
    bundle: Option<&WeightBundle>,
    clean: Option<&Sequence>,
) -> Result<Denoised> {
    if cfg.scales.len() < 2 {
        return Err(Error::Config("multi-scale needs at least two scales".into()));
    }
    let mut check = cfg.clone();
    check.scale_weights = Some(weights.to_vec());
    check.validate()?;

    let mut acc = vec![0.0f64; seq.data().len()];
    let mut frame_times = vec![Duration::ZERO; seq.frames()];
    let mut blocks = 0;
    let mut total = Duration::ZERO;
    for (&b, &w) in cfg.scales.iter().zip(weights) {
        let single = EngineConfig {
            block: b,
            scales: Vec::new(),
            scale_weights: None,
            ..cfg.clone()
        };
        let out = Denoiser::new(single, bundle)?.run(seq, clean)?;
        for (a, &v) in acc.iter_mut().zip(out.sequence.data()) {
            *a += w * f64::from(v);
        }
        for (t, d) in frame_times.iter_mut().zip(&out.frame_times) {
            *t += *d;
        }
        blocks += out.blocks_per_frame;
        total += out.total;
    }
    let data = acc.into_iter().map(|v| v as f32).collect();
    Ok(Denoised {
        sequence: Sequence::new(seq.frames(), seq.height(), seq.width(), data)?,
        frame_times,
        blocks_per_frame: blocks,
        total,
    })
}
