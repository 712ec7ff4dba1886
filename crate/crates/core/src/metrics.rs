//! PSNR and SSIM on the 8-bit scale.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seqio::{Sequence, CHANNELS};

pub const PEAK: f64 = 255.0;
/// Reported for frames with zero error.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

/// Per-frame scores and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub per_frame: Vec<f64>,
    pub mean: f64,
}

impl Score {
    fn from_frames(per_frame: Vec<f64>) -> Self {
        let mean = per_frame.iter().sum::<f64>() / per_frame.len() as f64;
        Self { per_frame, mean }
    }
}

fn check_dims(a: &Sequence, b: &Sequence) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.frames(),
            a.height(),
            a.width(),
            b.frames(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

pub fn frame_psnr(a: &[f32], b: &[f32]) -> f64 {
    let sse: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum();
    if sse == 0.0 {
        return PSNR_CAP;
    }
    let mse = sse / a.len() as f64;
    (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP)
}

pub fn psnr(reference: &Sequence, test: &Sequence) -> Result<Score> {
    check_dims(reference, test)?;
    let per_frame = (0..reference.frames())
        .into_par_iter()
        .map(|t| frame_psnr(reference.frame(t), test.frame(t)))
        .collect();
    Ok(Score::from_frames(per_frame))
}

fn gaussian_kernel() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let k: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is (h-10)×(w-10).
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = line[x..x + n].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for (j, &kv) in k.iter().enumerate() {
            let line = &rows[(y + j) * ow..(y + j + 1) * ow];
            for (o, &v) in out[y * ow..(y + 1) * ow].iter_mut().zip(line) {
                *o += kv * v;
            }
        }
    }
    out
}

fn plane_ssim(a: &[f32], b: &[f32], h: usize, w: usize, k: &[f64]) -> f64 {
    let a: Vec<f64> = a.iter().map(|&v| f64::from(v)).collect();
    let b: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(&b).map(|(&x, &y)| f(x, y)).collect() };
    let mu_a = filter_valid(&a, h, w, k);
    let mu_b = filter_valid(&b, h, w, k);
    let aa = filter_valid(&prod(|x, _| x * x), h, w, k);
    let bb = filter_valid(&prod(|_, y| y * y), h, w, k);
    let ab = filter_valid(&prod(|x, y| x * y), h, w, k);
    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
    sum / mu_a.len() as f64
}

/// Mean SSIM of one 3×H×W frame, averaged over channels.
pub fn frame_ssim(a: &[f32], b: &[f32], height: usize, width: usize) -> f64 {
    let k = gaussian_kernel();
    let plane = height * width;
    (0..CHANNELS)
        .map(|c| {
            let r = c * plane..(c + 1) * plane;
            plane_ssim(&a[r.clone()], &b[r], height, width, &k)
        })
        .sum::<f64>()
        / CHANNELS as f64
}

pub fn ssim(reference: &Sequence, test: &Sequence) -> Result<Score> {
    check_dims(reference, test)?;
    let (h, w) = (reference.height(), reference.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::DimMismatch(format!(
            "SSIM needs frames of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let per_frame = (0..reference.frames())
        .into_par_iter()
        .map(|t| frame_ssim(reference.frame(t), test.frame(t), h, w))
        .collect();
    Ok(Score::from_frames(per_frame))
}
