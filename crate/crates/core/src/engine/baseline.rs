//! Grayscale 3-D Wiener baseline: T×B×B blocks of BT.601 luma, half-cosine
//! analysis and synthesis windows (their product is the raised cosine),
//! half-block stride, mean DC, plain overlap-add.
//!
//! Noise is specified per RGB channel; luma of independently noised channels
//! has STD σ·sqrt(Σ LUMA²), which is what the filter uses.
//!
//! Blocks start at `-B/2` and the frame is edge-extended, so every pixel is
//! covered by exactly two blocks per axis and the raised cosine sums to one.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::{with_threads, EngineConfig, NoiseSpec};
use crate::error::{Error, Result};
use crate::seqio::{Sequence, LUMA};
use crate::spectral::{noise_psd, BlockShape, NoiseLevel, SpectralBlock, SpectralPlan};
use crate::windows::half_cosine;

/// Denoises the luma of `seq`; the result carries the filtered luma in all
/// three planes.
pub fn denoise_baseline3d(seq: &Sequence, cfg: &EngineConfig) -> Result<Sequence> {
    cfg.validate()?;
    let sigma = match cfg.noise {
        NoiseSpec::Sigma(s) => s,
        NoiseSpec::Blind => return Err(Error::Config("the 3-D baseline is non-blind".into())),
    };
    let b = cfg.block;
    let shape = BlockShape::new(cfg.taps, 1, b)?;
    let (h, w) = (seq.height(), seq.width());
    let luma = seq.to_luma();
    let profile = half_cosine(b);
    let window: Vec<f64> = profile
        .iter()
        .flat_map(|a| profile.iter().map(move |c| a * c))
        .collect();
    let luma_gain = LUMA.iter().map(|&c| f64::from(c) * f64::from(c)).sum::<f64>().sqrt();
    let pnn = noise_psd(NoiseLevel::Sigma(sigma * luma_gain), &window, cfg.taps, 1)?;
    let half = (b / 2) as isize;
    let starts = |extent: usize| -> Vec<isize> { (-half..extent as isize).step_by(b / 2).collect() };
    let (ys, xs) = (starts(h), starts(w));
    let taps = cfg.taps;
    let frames = seq.frames();

    let out = with_threads(cfg.threads, || {
        (0..frames)
            .into_par_iter()
            .map(|t| {
                let sources = super::tap_sources(frames, t, taps);
                let planes: Vec<&[f32]> = sources.iter().map(|&s| luma.plane(s, 0)).collect();
                let mut plan = SpectralPlan::new(shape);
                let mut spec = SpectralBlock::new(shape);
                let mut sample = vec![0.0f64; shape.len()];
                let mut tap = vec![Complex64::default(); shape.slice_len()];
                let mut acc = vec![0.0f64; h * w];
                for &y0 in &ys {
                    for &x0 in &xs {
                        let mut i = 0;
                        for plane in &planes {
                            for r in 0..b as isize {
                                let y = (y0 + r).clamp(0, h as isize - 1) as usize;
                                for c in 0..b as isize {
                                    let x = (x0 + c).clamp(0, w as isize - 1) as usize;
                                    sample[i] = f64::from(plane[y * w + x]);
                                    i += 1;
                                }
                            }
                        }
                        let dc = sample.iter().sum::<f64>() / sample.len() as f64;
                        spec.analyze(&mut plan, &sample, dc, &window, pnn);
                        for (s, g) in spec.spectrum.iter_mut().zip(&spec.gains) {
                            *s *= *g;
                        }
                        plan.inverse_tap(&spec.spectrum, taps / 2, &mut tap);
                        for r in 0..b {
                            let y = y0 + r as isize;
                            if y < 0 || y >= h as isize {
                                continue;
                            }
                            for c in 0..b {
                                let x = x0 + c as isize;
                                if x < 0 || x >= w as isize {
                                    continue;
                                }
                                let wv = window[r * b + c];
                                acc[y as usize * w + x as usize] += wv * (tap[r * b + c].re + wv * dc);
                            }
                        }
                    }
                }
                let plane: Vec<f32> = acc.into_iter().map(|v| v as f32).collect();
                let mut frame = Vec::with_capacity(3 * h * w);
                for _ in 0..3 {
                    frame.extend_from_slice(&plane);
                }
                frame
            })
            .collect::<Vec<_>>()
    })?;
    Sequence::new(frames, h, w, out.concat())
}
