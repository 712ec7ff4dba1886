use std::time::Instant;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::buffer::FrameBuffer;
use super::{with_threads, Denoised, EngineConfig, Mode, NoiseSpec};
use crate::error::{Error, Result};
use crate::mocomp::{build_buffer_mc, WarpSpec};
use crate::nets::{CoringNet, NoiseNet};
use crate::seqio::{Sequence, WeightBundle, CHANNELS};
use crate::spectral::{median_in_place, BlockShape, DcMode, SpectralBlock, SpectralPlan};
use crate::tensor::Tensor;
use crate::windows::{block_positions, NormMap, PlacementWindows, WindowPair};

/// Noise statistics for one frame.
enum FrameNoise {
    Variance(f64),
    /// Summed-area table of the squared STD map, (H+1)×(W+1).
    Map {
        table: Vec<f64>,
        width: usize,
    },
}

impl FrameNoise {
    fn from_map(map: &[f32], height: usize, width: usize) -> Self {
        let w1 = width + 1;
        let mut table = vec![0.0f64; (height + 1) * w1];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                let v = f64::from(map[y * width + x]);
                row += v * v;
                table[(y + 1) * w1 + x + 1] = table[y * w1 + x + 1] + row;
            }
        }
        FrameNoise::Map { table, width }
    }

    /// σ̂² for the block footprint at `(y0, x0)`.
    fn variance(&self, y0: usize, x0: usize, block: usize) -> f64 {
        match self {
            FrameNoise::Variance(v) => *v,
            FrameNoise::Map { table, width } => {
                let w1 = width + 1;
                let (y1, x1) = (y0 + block, x0 + block);
                let s = table[y1 * w1 + x1] - table[y0 * w1 + x1] - table[y1 * w1 + x0] + table[y0 * w1 + x0];
                (s / (block * block) as f64).max(0.0)
            }
        }
    }
}

/// Per-worker scratch.
struct Worker {
    plan: SpectralPlan,
    spec: SpectralBlock,
    sample: Vec<f64>,
    scratch: Vec<f64>,
    tap: Vec<Complex64>,
}

/// A configured 4-D Wiener denoiser for one block size.
#[derive(Debug, Clone)]
pub struct Denoiser {
    cfg: EngineConfig,
    windows: PlacementWindows,
    shape: BlockShape,
    coring: Option<CoringNet>,
    noise_net: Option<NoiseNet>,
    warp: Option<WarpSpec>,
}

impl Denoiser {
    pub fn new(cfg: EngineConfig, bundle: Option<&WeightBundle>) -> Result<Self> {
        cfg.validate()?;
        let shape = BlockShape::new(cfg.taps, CHANNELS, cfg.block)?;
        let pair = WindowPair::new(cfg.window, cfg.block, cfg.alpha, bundle)?;
        let windows = PlacementWindows::new(&pair, cfg.flat_borders);
        let coring = match cfg.mode {
            Mode::Classic => None,
            Mode::Refined => {
                let bundle = bundle.ok_or_else(|| Error::Config("refined mode needs a weight bundle".into()))?;
                let net = CoringNet::from_bundle(bundle)?;
                if net.taps() != cfg.taps {
                    return Err(Error::DimMismatch(format!(
                        "coring net expects {} taps, config uses {}",
                        net.taps(),
                        cfg.taps
                    )));
                }
                Some(net)
            }
        };
        let noise_net = match cfg.noise {
            NoiseSpec::Sigma(_) => None,
            NoiseSpec::Blind => {
                let bundle = bundle.ok_or_else(|| Error::Config("blind mode needs a weight bundle".into()))?;
                Some(NoiseNet::from_bundle(bundle)?)
            }
        };
        let warp = cfg.flows.clone().map(WarpSpec::new);
        Ok(Self {
            cfg,
            windows,
            shape,
            coring,
            noise_net,
            warp,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn windows(&self) -> &WindowPair {
        self.windows.interior()
    }

    pub fn blocks_per_frame(&self, height: usize, width: usize) -> usize {
        crate::windows::block_count(height, width, self.cfg.block, self.cfg.stride())
    }

    fn worker(&self) -> Worker {
        Worker {
            plan: SpectralPlan::new(self.shape),
            spec: SpectralBlock::new(self.shape),
            sample: vec![0.0; self.shape.len()],
            scratch: vec![0.0; self.shape.len()],
            tap: vec![Complex64::default(); self.shape.slice_len()],
        }
    }

    fn buffer<'a>(&self, seq: &'a Sequence, t: usize) -> Result<FrameBuffer<'a>> {
        match &self.warp {
            Some(spec) => build_buffer_mc(seq, t, self.cfg.taps, spec),
            None => FrameBuffer::new(seq, t, self.cfg.taps),
        }
    }

    pub fn run(&self, seq: &Sequence, clean: Option<&Sequence>) -> Result<Denoised> {
        self.run_inner(seq, clean, None)
    }

    /// Denoises with caller-supplied per-frame STD maps (each H×W) in place
    /// of the configured noise level.
    pub fn run_with_noise_maps(&self, seq: &Sequence, clean: Option<&Sequence>, maps: &[Vec<f32>]) -> Result<Denoised> {
        if maps.len() != seq.frames() || maps.iter().any(|m| m.len() != seq.plane_len()) {
            return Err(Error::DimMismatch("need one H×W noise map per frame".into()));
        }
        self.run_inner(seq, clean, Some(maps))
    }

    fn run_inner(&self, seq: &Sequence, clean: Option<&Sequence>, maps: Option<&[Vec<f32>]>) -> Result<Denoised> {
        let (h, w) = (seq.height(), seq.width());
        let b = self.cfg.block;
        if b > h || b > w {
            return Err(Error::Config(format!("block {b} does not fit {w}x{h} frames")));
        }
        if let Some(c) = clean {
            if !c.same_shape(seq) {
                return Err(Error::DimMismatch("clean sequence shape differs from input".into()));
            }
        }
        if self.cfg.dc == DcMode::GroundTruth && clean.is_none() {
            return Err(Error::Config("dc=gt needs the clean sequence".into()));
        }
        let norm = NormMap::for_placements(&self.windows, h, w, self.cfg.stride())?;
        let start = Instant::now();

        let frames = with_threads(self.cfg.threads, || {
            (0..seq.frames())
                .into_par_iter()
                .map(|t| {
                    let t0 = Instant::now();
                    let buf = self.buffer(seq, t)?;
                    let clean_buf = clean.map(|c| self.buffer(c, t)).transpose()?;
                    let noise = match (maps, self.cfg.noise) {
                        (Some(m), _) => FrameNoise::from_map(&m[t], h, w),
                        (None, NoiseSpec::Sigma(s)) => FrameNoise::Variance(s * s),
                        (None, NoiseSpec::Blind) => {
                            let net = self.noise_net.as_ref().expect("blind mode builds a noise net");
                            FrameNoise::from_map(&net.estimate(seq.frame(t), h, w)?, h, w)
                        }
                    };
                    let out = self.denoise_frame(&buf, clean_buf.as_ref(), &noise, &norm)?;
                    Ok((out, t0.elapsed()))
                })
                .collect::<Result<Vec<_>>>()
        })??;

        let mut data = Vec::with_capacity(seq.data().len());
        let mut frame_times = Vec::with_capacity(frames.len());
        for (f, d) in frames {
            data.extend_from_slice(&f);
            frame_times.push(d);
        }
        Ok(Denoised {
            sequence: Sequence::new(seq.frames(), h, w, data)?,
            frame_times,
            blocks_per_frame: self.blocks_per_frame(h, w),
            total: start.elapsed(),
        })
    }

    /// Extracts, windows, transforms and cores one block; returns its DC.
    fn analyze_block(
        &self,
        wk: &mut Worker,
        buf: &FrameBuffer<'_>,
        clean: Option<&FrameBuffer<'_>>,
        noise: &FrameNoise,
        y0: usize,
        x0: usize,
    ) -> f64 {
        let b = self.shape.block;
        buf.extract(y0, x0, b, &mut wk.sample);
        let n = wk.sample.len() as f64;
        let dc = match self.cfg.dc {
            DcMode::Mean => wk.sample.iter().sum::<f64>() / n,
            DcMode::Median => {
                wk.scratch.copy_from_slice(&wk.sample);
                median_in_place(&mut wk.scratch)
            }
            DcMode::GroundTruth => {
                let clean = clean.expect("validated before processing");
                clean.extract(y0, x0, b, &mut wk.scratch);
                wk.scratch.iter().sum::<f64>() / n
            }
        };
        let pair = self.windows.for_block(y0, x0, buf.height(), buf.width());
        let energy = pair.analysis_energy() * (self.shape.taps * self.shape.channels) as f64;
        let pnn = noise.variance(y0, x0, b) * energy;
        wk.spec.analyze(&mut wk.plan, &wk.sample, dc, pair.analysis(), pnn);
        dc
    }

    /// Applies gains, inverts the centre tap and overlap-adds
    /// `w_s ⊙ (x̂ + w_a·dc)` into a strip of `B` rows × frame width.
    fn reconstruct(
        &self,
        wk: &mut Worker,
        dc: f64,
        refined: Option<&[f32]>,
        strip: &mut [f64],
        (y0, x0): (usize, usize),
        (height, width): (usize, usize),
    ) {
        match refined {
            None => {
                for (s, g) in wk.spec.spectrum.iter_mut().zip(&wk.spec.gains) {
                    *s *= *g;
                }
            }
            Some(gains) => {
                let clamp = self.cfg.clamp_refined;
                for (s, &g) in wk.spec.spectrum.iter_mut().zip(gains) {
                    let g = f64::from(g);
                    *s *= if clamp { g.clamp(0.0, 1.0) } else { g };
                }
            }
        }
        let centre = self.shape.taps / 2;
        wk.plan.inverse_tap(&wk.spec.spectrum, centre, &mut wk.tap);
        let b = self.shape.block;
        let pair = self.windows.for_block(y0, x0, height, width);
        let (wa, ws) = (pair.analysis(), pair.synthesis());
        for c in 0..CHANNELS {
            for h in 0..b {
                let src = &wk.tap[(c * b + h) * b..(c * b + h + 1) * b];
                let dst = &mut strip[(c * b + h) * width + x0..(c * b + h) * width + x0 + b];
                let (wa, ws) = (&wa[h * b..(h + 1) * b], &ws[h * b..(h + 1) * b]);
                for k in 0..b {
                    dst[k] += ws[k] * (src[k].re + wa[k] * dc);
                }
            }
        }
    }

    fn denoise_frame(
        &self,
        buf: &FrameBuffer<'_>,
        clean: Option<&FrameBuffer<'_>>,
        noise: &FrameNoise,
        norm: &NormMap,
    ) -> Result<Vec<f32>> {
        let (h, w) = (buf.height(), buf.width());
        let b = self.cfg.block;
        let stride = self.cfg.stride();
        let ys = block_positions(h, b, stride);
        let xs = block_positions(w, b, stride);
        let strip_len = CHANNELS * b * w;

        let strips: Vec<Vec<f64>> = match &self.coring {
            None => ys
                .par_iter()
                .map_init(
                    || self.worker(),
                    |wk, &y0| {
                        let mut strip = vec![0.0f64; strip_len];
                        for &x0 in &xs {
                            let dc = self.analyze_block(wk, buf, clean, noise, y0, x0);
                            self.reconstruct(wk, dc, None, &mut strip, (y0, x0), (h, w));
                        }
                        strip
                    },
                )
                .collect(),
            Some(net) => {
                let n = self.shape.len();
                let rows: Vec<Vec<f32>> = ys
                    .par_iter()
                    .map_init(
                        || self.worker(),
                        |wk, &y0| {
                            let mut g = Vec::with_capacity(xs.len() * n);
                            for &x0 in &xs {
                                self.analyze_block(wk, buf, clean, noise, y0, x0);
                                g.extend(wk.spec.gains.iter().map(|&v| v as f32));
                            }
                            g
                        },
                    )
                    .collect();
                let mut dims = vec![ys.len() * xs.len()];
                dims.extend_from_slice(&self.shape.dims());
                let gains = Tensor::new(dims, rows.concat())?;
                let refined = net.refine(gains, (ys.len(), xs.len()))?;
                let refined = refined.data();
                let row_len = xs.len() * n;
                ys.par_iter()
                    .enumerate()
                    .map_init(
                        || self.worker(),
                        |wk, (i, &y0)| {
                            let mut strip = vec![0.0f64; strip_len];
                            for (j, &x0) in xs.iter().enumerate() {
                                let dc = self.analyze_block(wk, buf, clean, noise, y0, x0);
                                let g = &refined[i * row_len + j * n..i * row_len + (j + 1) * n];
                                self.reconstruct(wk, dc, Some(g), &mut strip, (y0, x0), (h, w));
                            }
                            strip
                        },
                    )
                    .collect()
            }
        };

        let mut acc = vec![0.0f64; CHANNELS * h * w];
        for (strip, &y0) in strips.iter().zip(&ys) {
            for c in 0..CHANNELS {
                for r in 0..b {
                    let src = &strip[(c * b + r) * w..(c * b + r + 1) * w];
                    let dst = &mut acc[(c * h + y0 + r) * w..(c * h + y0 + r + 1) * w];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
        let weights = norm.weights();
        Ok(acc
            .chunks_exact(h * w)
            .flat_map(|plane| plane.iter().zip(weights).map(|(v, n)| (v / n) as f32))
            .collect())
    }
}

/// Noise STD map for frame `t` from the bundle's noise net. Downstream, the
/// map applies to every temporal tap of the frame's blocks.
pub fn blind_sigma(seq: &Sequence, t: usize, bundle: &WeightBundle) -> Result<Vec<f32>> {
    if t >= seq.frames() {
        return Err(Error::Config(format!("frame {t} out of range")));
    }
    let net = NoiseNet::from_bundle(bundle)?;
    net.estimate(seq.frame(t), seq.height(), seq.width())
}
