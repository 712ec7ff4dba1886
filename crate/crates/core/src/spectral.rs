//! Block-level spectral math: the T×C×B×B FFT, PSDs, Wiener coring and DC
//! offset estimation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Extents of one spectral block: temporal taps × colour planes × B × B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockShape {
    pub taps: usize,
    pub channels: usize,
    pub block: usize,
}

impl BlockShape {
    pub fn new(taps: usize, channels: usize, block: usize) -> Result<Self> {
        if taps == 0 || taps.is_multiple_of(2) {
            return Err(Error::Config(format!("temporal taps must be odd, got {taps}")));
        }
        if channels == 0 {
            return Err(Error::Config("need at least one channel".into()));
        }
        if block < 2 || !block.is_power_of_two() {
            return Err(Error::Config(format!(
                "block size must be a power of two >= 2, got {block}"
            )));
        }
        Ok(Self { taps, channels, block })
    }

    pub fn len(&self) -> usize {
        self.taps * self.slice_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples in one temporal tap (C×B×B).
    pub fn slice_len(&self) -> usize {
        self.channels * self.block * self.block
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.taps, self.channels, self.block, self.block]
    }
}

#[derive(Clone)]
struct AxisPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Reusable forward/inverse transforms plus scratch for one [`BlockShape`].
/// Not shared between threads; clone one per worker.
#[derive(Clone)]
pub struct SpectralPlan {
    shape: BlockShape,
    axes: [AxisPlan; 4],
    scratch: Vec<Complex64>,
    lines: Vec<Complex64>,
}

impl fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan").field("shape", &self.shape).finish()
    }
}

impl SpectralPlan {
    pub fn new(shape: BlockShape) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let axes = shape.dims().map(|n| AxisPlan {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        });
        let scratch_len = axes
            .iter()
            .flat_map(|a| [a.forward.get_inplace_scratch_len(), a.inverse.get_inplace_scratch_len()])
            .max()
            .unwrap_or(0);
        Self {
            shape,
            axes,
            scratch: vec![Complex64::default(); scratch_len],
            lines: vec![Complex64::default(); shape.len()],
        }
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    /// Unnormalized forward DFT over all four axes, in place.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.shape.len());
        let dims = self.shape.dims();
        for axis in (0..4).rev() {
            let fft = self.axes[axis].forward.clone();
            transform_axis(data, &dims, axis, &*fft, &mut self.scratch, &mut self.lines);
        }
    }

    /// Inverse DFT over all four axes scaled by 1/N, in place.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.shape.len());
        let dims = self.shape.dims();
        for axis in (0..4).rev() {
            let fft = self.axes[axis].inverse.clone();
            transform_axis(data, &dims, axis, &*fft, &mut self.scratch, &mut self.lines);
        }
        let scale = 1.0 / self.shape.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// Inverse DFT evaluated only at temporal tap `tap`, written to `out`
    /// (C×B×B). Equivalent to slicing [`SpectralPlan::inverse`] at `tap`.
    pub fn inverse_tap(&mut self, spectrum: &[Complex64], tap: usize, out: &mut [Complex64]) {
        let s = self.shape;
        assert_eq!(spectrum.len(), s.len());
        assert_eq!(out.len(), s.slice_len());
        assert!(tap < s.taps);
        out.fill(Complex64::default());
        let step = 2.0 * std::f64::consts::PI / s.taps as f64;
        for k in 0..s.taps {
            let phase = step * ((k * tap) % s.taps) as f64;
            let tw = Complex64::new(phase.cos(), phase.sin());
            let slice = &spectrum[k * s.slice_len()..(k + 1) * s.slice_len()];
            for (o, v) in out.iter_mut().zip(slice) {
                *o += v * tw;
            }
        }
        let dims = [s.channels, s.block, s.block];
        for axis in (0..3).rev() {
            let fft = self.axes[axis + 1].inverse.clone();
            transform_axis(out, &dims, axis, &*fft, &mut self.scratch, &mut self.lines);
        }
        let scale = 1.0 / s.len() as f64;
        out.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Applies `fft` to every line of `data` along `axis` of a row-major array.
fn transform_axis(
    data: &mut [Complex64],
    dims: &[usize],
    axis: usize,
    fft: &dyn Fft<f64>,
    scratch: &mut [Complex64],
    lines: &mut [Complex64],
) {
    let n = dims[axis];
    if n == 1 {
        return;
    }
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    if inner == 1 {
        fft.process_with_scratch(data, scratch);
        return;
    }
    let lines = &mut lines[..data.len()];
    for o in 0..outer {
        let base = o * n * inner;
        for k in 0..n {
            let src = &data[base + k * inner..base + (k + 1) * inner];
            for (i, v) in src.iter().enumerate() {
                lines[(o * inner + i) * n + k] = *v;
            }
        }
    }
    fft.process_with_scratch(lines, scratch);
    for o in 0..outer {
        let base = o * n * inner;
        for k in 0..n {
            let dst = &mut data[base + k * inner..base + (k + 1) * inner];
            for (i, v) in dst.iter_mut().enumerate() {
                *v = lines[(o * inner + i) * n + k];
            }
        }
    }
}

/// Forward 4-D DFT of a real block.
pub fn fftn(block: &[f64], shape: BlockShape) -> Result<Vec<Complex64>> {
    if block.len() != shape.len() {
        return Err(Error::DimMismatch(format!(
            "block has {} samples, shape {:?} needs {}",
            block.len(),
            shape.dims(),
            shape.len()
        )));
    }
    let mut data: Vec<Complex64> = block.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    SpectralPlan::new(shape).forward(&mut data);
    Ok(data)
}

/// Inverse 4-D DFT; the imaginary residue is discarded.
pub fn ifftn(spectrum: &[Complex64], shape: BlockShape) -> Result<Vec<f64>> {
    if spectrum.len() != shape.len() {
        return Err(Error::DimMismatch(format!(
            "spectrum has {} bins, shape {:?} needs {}",
            spectrum.len(),
            shape.dims(),
            shape.len()
        )));
    }
    let mut data = spectrum.to_vec();
    SpectralPlan::new(shape).inverse(&mut data);
    Ok(data.into_iter().map(|v| v.re).collect())
}

/// Noise level for one block.
#[derive(Debug, Clone, Copy)]
pub enum NoiseLevel<'a> {
    /// Standard deviation on the 8-bit scale.
    Sigma(f64),
    /// Per-pixel standard deviations over the block footprint.
    Map(&'a [f32]),
}

impl NoiseLevel<'_> {
    pub fn variance(&self) -> Result<f64> {
        match *self {
            NoiseLevel::Sigma(s) => {
                if !s.is_finite() || s < 0.0 {
                    return Err(Error::Config(format!("noise sigma must be >= 0, got {s}")));
                }
                Ok(s * s)
            }
            NoiseLevel::Map(m) => {
                if m.is_empty() {
                    return Err(Error::DimMismatch("empty noise map footprint".into()));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Format("non-finite noise map value".into()));
                }
                Ok(m.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>() / m.len() as f64)
            }
        }
    }
}

/// Expected per-bin PSD of windowed white noise: σ̂²·Σw_a² over the full
/// taps × channels × B × B window. `analysis` is one B×B slice.
pub fn noise_psd(level: NoiseLevel<'_>, analysis: &[f64], taps: usize, channels: usize) -> Result<f64> {
    let energy: f64 = analysis.iter().map(|w| w * w).sum();
    Ok(level.variance()? * energy * (taps * channels) as f64)
}

/// Wiener gain for one bin: max(Pyy − Pnn, 0)/Pyy, zero where Pyy = 0.
#[inline]
pub fn wiener_gain(pyy: f64, pnn: f64) -> f64 {
    if pyy > 0.0 {
        (pyy - pnn).max(0.0) / pyy
    } else {
        0.0
    }
}

/// Coring: `Pxx = max(Pyy − Pnn, 0)` and `H = Pxx/Pyy` per bin.
pub fn core_gains(pyy: &[f64], pnn: f64) -> (Vec<f64>, Vec<f64>) {
    let pxx: Vec<f64> = pyy.iter().map(|&p| (p - pnn).max(0.0)).collect();
    let h = pyy.iter().map(|&p| wiener_gain(p, pnn)).collect();
    (pxx, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcMode {
    Mean,
    Median,
    /// Mean of the co-located clean block.
    GroundTruth,
}

impl FromStr for DcMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(DcMode::Mean),
            "median" => Ok(DcMode::Median),
            "gt" => Ok(DcMode::GroundTruth),
            other => Err(Error::Config(format!("unknown dc mode {other:?}"))),
        }
    }
}

impl fmt::Display for DcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DcMode::Mean => "mean",
            DcMode::Median => "median",
            DcMode::GroundTruth => "gt",
        })
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Exact median; even counts average the two middle values. Reorders `v`.
pub fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (left, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Scalar DC offset of a whole block.
pub fn dc_offset(block: &[f64], mode: DcMode, clean: Option<&[f64]>) -> Result<f64> {
    if block.is_empty() {
        return Err(Error::DimMismatch("empty block".into()));
    }
    match mode {
        DcMode::Mean => Ok(mean(block)),
        DcMode::Median => Ok(median_in_place(&mut block.to_vec())),
        DcMode::GroundTruth => {
            let clean = clean.ok_or_else(|| Error::Config("ground-truth DC needs the clean sequence".into()))?;
            if clean.len() != block.len() {
                return Err(Error::DimMismatch("clean block size differs".into()));
            }
            Ok(mean(clean))
        }
    }
}

/// One extracted T×C×B×B block and its DC offset.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSample {
    pub data: Vec<f64>,
    pub dc: f64,
    /// (frame, y, x) of the block's top-left corner.
    pub origin: (usize, usize, usize),
}

/// Spectrum, PSDs and gains of one windowed block. Buffers are reused across
/// calls to [`SpectralBlock::analyze`].
#[derive(Debug, Clone)]
pub struct SpectralBlock {
    pub spectrum: Vec<Complex64>,
    pub pyy: Vec<f64>,
    pub pxx: Vec<f64>,
    pub gains: Vec<f64>,
    pub pnn: f64,
}

impl SpectralBlock {
    pub fn new(shape: BlockShape) -> Self {
        let n = shape.len();
        Self {
            spectrum: vec![Complex64::default(); n],
            pyy: vec![0.0; n],
            pxx: vec![0.0; n],
            gains: vec![0.0; n],
            pnn: 0.0,
        }
    }

    /// Windows `(sample − dc)` by the B×B analysis profile, transforms it and
    /// cores against `pnn`.
    pub fn analyze(&mut self, plan: &mut SpectralPlan, sample: &[f64], dc: f64, analysis: &[f64], pnn: f64) {
        let s = plan.shape();
        let bb = s.block * s.block;
        debug_assert_eq!(analysis.len(), bb);
        for (chunk, out) in sample.chunks_exact(bb).zip(self.spectrum.chunks_exact_mut(bb)) {
            for ((o, &v), &w) in out.iter_mut().zip(chunk).zip(analysis) {
                *o = Complex64::new((v - dc) * w, 0.0);
            }
        }
        plan.forward(&mut self.spectrum);
        self.pnn = pnn;
        for i in 0..self.spectrum.len() {
            let p = self.spectrum[i].norm_sqr();
            self.pyy[i] = p;
            self.pxx[i] = (p - pnn).max(0.0);
            self.gains[i] = wiener_gain(p, pnn);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct O(N²) 4-D DFT, the independent oracle for the FFT path.
    fn naive_dft(x: &[Complex64], dims: [usize; 4], sign: f64) -> Vec<Complex64> {
        let n: usize = dims.iter().product();
        let idx = |i: usize| {
            let mut r = [0usize; 4];
            let mut rem = i;
            for a in (0..4).rev() {
                r[a] = rem % dims[a];
                rem /= dims[a];
            }
            r
        };
        (0..n)
            .map(|k| {
                let kk = idx(k);
                let mut acc = Complex64::default();
                for (j, v) in x.iter().enumerate() {
                    let jj = idx(j);
                    let phase: f64 = (0..4).map(|a| (kk[a] * jj[a]) as f64 / dims[a] as f64).sum::<f64>()
                        * 2.0
                        * std::f64::consts::PI
                        * sign;
                    acc += v * Complex64::new(phase.cos(), phase.sin());
                }
                acc
            })
            .collect()
    }

    #[test]
    fn impulse_and_constant() {
        let shape = BlockShape::new(3, 3, 4).unwrap();
        let mut x = vec![0.0; shape.len()];
        x[0] = 1.0;
        let y = fftn(&x, shape).unwrap();
        assert!(y.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));

        let c = 2.5;
        let y = fftn(&vec![c; shape.len()], shape).unwrap();
        assert!((y[0].re - c * shape.len() as f64).abs() < 1e-9);
        assert!(y[1..].iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn matches_naive_dft() {
        let shape = BlockShape::new(3, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..shape.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = fftn(&x, shape).unwrap();
        let cx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let slow = naive_dft(&cx, shape.dims(), -1.0);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_spectrum_is_zero_block() {
        let shape = BlockShape::new(5, 3, 4).unwrap();
        let x = ifftn(&vec![Complex64::default(); shape.len()], shape).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_hermitian_inverse_is_real_part() {
        let shape = BlockShape::new(3, 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec: Vec<Complex64> = (0..shape.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let fast = ifftn(&spec, shape).unwrap();
        let n = shape.len() as f64;
        let slow = naive_dft(&spec, shape.dims(), 1.0);
        for (a, b) in fast.iter().zip(&slow) {
            assert!(a.is_finite());
            assert!((a - b.re / n).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_tap_matches_full_inverse() {
        let shape = BlockShape::new(5, 3, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec: Vec<Complex64> = (0..shape.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut plan = SpectralPlan::new(shape);
        let mut full = spec.clone();
        plan.inverse(&mut full);
        let mut out = vec![Complex64::default(); shape.slice_len()];
        for tap in 0..5 {
            plan.inverse_tap(&spec, tap, &mut out);
            let slice = &full[tap * shape.slice_len()..(tap + 1) * shape.slice_len()];
            for (a, b) in out.iter().zip(slice) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_psd_examples() {
        let ones = vec![1.0; 4];
        assert_eq!(noise_psd(NoiseLevel::Sigma(0.0), &ones, 5, 3).unwrap(), 0.0);
        assert_eq!(noise_psd(NoiseLevel::Sigma(1.0), &ones, 5, 3).unwrap(), 60.0);
        assert!(noise_psd(NoiseLevel::Sigma(-1.0), &ones, 5, 3).is_err());
        let map = [20.0f32; 16];
        assert_eq!(
            noise_psd(NoiseLevel::Map(&map), &ones, 5, 3).unwrap(),
            noise_psd(NoiseLevel::Sigma(20.0), &ones, 5, 3).unwrap()
        );
        let map = [0.0f32, 2.0];
        assert_eq!(NoiseLevel::Map(&map).variance().unwrap(), 2.0);
    }

    #[test]
    fn coring_examples() {
        let (pxx, h) = core_gains(&[10.0, 3.0, 0.0], 4.0);
        assert_eq!(pxx, vec![6.0, 0.0, 0.0]);
        assert!((h[0] - 0.6).abs() < 1e-12);
        assert_eq!(h[1], 0.0);
        assert_eq!(h[2], 0.0);
        let (_, h) = core_gains(&[1.0, 5.0, 0.0], 0.0);
        assert_eq!(h, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn dc_examples() {
        let b = [0.0, 0.0, 0.0, 100.0];
        assert_eq!(dc_offset(&b, DcMode::Median, None).unwrap(), 0.0);
        assert_eq!(dc_offset(&b, DcMode::Mean, None).unwrap(), 25.0);
        assert_eq!(dc_offset(&[1.0, 2.0, 3.0, 4.0], DcMode::Median, None).unwrap(), 2.5);
        let c = [7.0; 9];
        for mode in [DcMode::Mean, DcMode::Median] {
            assert_eq!(dc_offset(&c, mode, None).unwrap(), 7.0);
        }
        assert_eq!(dc_offset(&c, DcMode::GroundTruth, Some(&c)).unwrap(), 7.0);
        assert!(matches!(
            dc_offset(&c, DcMode::GroundTruth, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn median_ignores_single_outlier() {
        let base = [3.0, 9.0, 1.0, 5.0, 7.0];
        let m = dc_offset(&base, DcMode::Median, None).unwrap();
        let mut outlier = base;
        outlier[1] = 1e6; // 9 -> huge: still above the median
        assert_eq!(dc_offset(&outlier, DcMode::Median, None).unwrap(), m);
    }

    #[test]
    fn shape_validation() {
        assert!(BlockShape::new(4, 3, 16).is_err());
        assert!(BlockShape::new(5, 3, 12).is_err());
        assert!(BlockShape::new(5, 0, 16).is_err());
        let shape = BlockShape::new(5, 3, 4).unwrap();
        assert!(fftn(&[0.0; 3], shape).is_err());
    }
}
