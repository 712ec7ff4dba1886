//! Inference for the two auxiliary networks: the two-stage coring refinement
//! net and the blind noise-map net.
//!
//! Weight names in a [`WeightBundle`]: `coring.s1.k{i}`, `coring.s2.k{i}`,
//! `noise.k{i}` and the optional scalar `meta.leaky_slope`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seqio::{WeightBundle, CHANNELS};
use crate::tensor::{conv_forward, count_params, rearrange, Activation, ConvLayer, Tensor, DEFAULT_LEAKY_SLOPE};

pub const LEAKY_SLOPE_TENSOR: &str = "meta.leaky_slope";

/// Parameter totals of the reference architecture, kept for comparison with
/// [`CoringNet::param_count`] / [`NoiseNet::param_count`].
pub const REFERENCE_CORING_PARAMS: usize = 279_315;
pub const REFERENCE_NOISE_PARAMS: usize = 8_280;

/// Layer widths of the default coring net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoringLayout {
    pub taps: usize,
    pub width: usize,
    pub kernel: usize,
    pub stage1_layers: usize,
    pub stage2_layers: usize,
}

impl Default for CoringLayout {
    fn default() -> Self {
        Self {
            taps: 5,
            width: 40,
            kernel: 3,
            stage1_layers: 6,
            stage2_layers: 5,
        }
    }
}

impl CoringLayout {
    fn stage_dims(&self, layers: usize) -> Vec<Vec<usize>> {
        let k = self.kernel;
        (0..layers)
            .map(|i| {
                let c_in = if i == 0 { self.taps } else { self.width };
                let c_out = if i + 1 == layers { self.taps } else { self.width };
                vec![c_out, c_in, k, k, k]
            })
            .collect()
    }

    /// Kernel dims per stage.
    pub fn kernel_dims(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        (self.stage_dims(self.stage1_layers), self.stage_dims(self.stage2_layers))
    }

    /// Σ c_out·c_in·k³ over both stages.
    pub fn param_count(&self) -> usize {
        let (s1, s2) = self.kernel_dims();
        s1.iter().chain(&s2).map(|d| d.iter().product::<usize>()).sum()
    }
}

/// Channel widths of the noise net (3 → 20 → 20 → 20 → 1, 3×3 kernels).
pub const NOISE_WIDTHS: [usize; 5] = [CHANNELS, 20, 20, 20, 1];
pub const NOISE_KERNEL: usize = 3;

pub fn noise_kernel_dims() -> Vec<Vec<usize>> {
    NOISE_WIDTHS
        .windows(2)
        .map(|w| vec![w[1], w[0], NOISE_KERNEL, NOISE_KERNEL])
        .collect()
}

fn leaky_slope(bundle: &WeightBundle) -> Result<f32> {
    match bundle.get(LEAKY_SLOPE_TENSOR) {
        None => Ok(DEFAULT_LEAKY_SLOPE),
        Some(t) if t.len() == 1 && t.data()[0].is_finite() => Ok(t.data()[0]),
        Some(t) => Err(Error::Format(format!(
            "{LEAKY_SLOPE_TENSOR} must hold one finite value, has dims {:?}",
            t.dims()
        ))),
    }
}

/// Loads `{prefix}{i}` for i = 0, 1, … until the first gap. The last layer
/// has no activation.
fn load_chain(bundle: &WeightBundle, prefix: &str, rank: usize, slope: f32) -> Result<Vec<ConvLayer>> {
    let mut kernels = Vec::new();
    while let Some(t) = bundle.get(&format!("{prefix}{}", kernels.len())) {
        kernels.push(t.clone());
    }
    if kernels.is_empty() {
        return Err(Error::MissingTensor(format!("{prefix}0")));
    }
    let n = kernels.len();
    let mut layers = Vec::with_capacity(n);
    for (i, k) in kernels.into_iter().enumerate() {
        if k.dims().len() != rank + 2 {
            return Err(Error::DimMismatch(format!(
                "{prefix}{i} has dims {:?}, expected a {rank}-D kernel",
                k.dims()
            )));
        }
        let act = if i + 1 == n {
            Activation::None
        } else {
            Activation::Leaky(slope)
        };
        let layer = ConvLayer::new(k, act)?;
        if let Some(prev) = layers.last().map(ConvLayer::c_out) {
            if prev != layer.c_in() {
                return Err(Error::DimMismatch(format!(
                    "{prefix}{i} expects {} input channels, previous layer gives {prev}",
                    layer.c_in()
                )));
            }
        }
        layers.push(layer);
    }
    Ok(layers)
}

/// Runs a conv chain over `[n, c, …]`, splitting the batch axis across
/// workers. Items are independent, so the result does not depend on the
/// worker count.
fn run_chain(layers: &[ConvLayer], x: Tensor) -> Result<Tensor> {
    let dims = x.dims().to_vec();
    let n = dims[0];
    let item_in: usize = dims[1..].iter().product();
    let out_channels = layers.last().map_or(dims[1], ConvLayer::c_out);
    let item_out = item_in / dims[1].max(1) * out_channels;
    let mut out = vec![0.0f32; n * item_out];
    let data = x.into_data();
    out.par_chunks_mut(item_out.max(1))
        .zip(data.par_chunks(item_in.max(1)))
        .try_for_each(|(dst, src)| -> Result<()> {
            let mut item_dims = dims.clone();
            item_dims[0] = 1;
            let mut t = Tensor::new(item_dims, src.to_vec())?;
            for layer in layers {
                t = conv_forward(&t, layer)?;
            }
            dst.copy_from_slice(t.data());
            Ok(())
        })?;
    let mut out_dims = dims;
    out_dims[1] = out_channels;
    Tensor::new(out_dims, out)
}

/// Two-stage coring refinement network: an intra-block stage over
/// `[blocks, T, C, B, B]` and an inter-block stage over
/// `[B·B, T, C, grid_rows, grid_cols]`, both with T as the channel axis.
#[derive(Debug, Clone)]
pub struct CoringNet {
    stage1: Vec<ConvLayer>,
    stage2: Vec<ConvLayer>,
}

impl CoringNet {
    pub fn from_bundle(bundle: &WeightBundle) -> Result<Self> {
        let slope = leaky_slope(bundle)?;
        let stage1 = load_chain(bundle, "coring.s1.k", 3, slope)?;
        let stage2 = load_chain(bundle, "coring.s2.k", 3, slope)?;
        for (name, stage) in [("stage 1", &stage1), ("stage 2", &stage2)] {
            if stage[0].c_in() != stage.last().unwrap().c_out() {
                return Err(Error::DimMismatch(format!(
                    "coring {name} maps {} channels to {}",
                    stage[0].c_in(),
                    stage.last().unwrap().c_out()
                )));
            }
        }
        if stage1[0].c_in() != stage2[0].c_in() {
            return Err(Error::DimMismatch(format!(
                "coring stages disagree on taps: {} vs {}",
                stage1[0].c_in(),
                stage2[0].c_in()
            )));
        }
        Ok(Self { stage1, stage2 })
    }

    /// Temporal taps the net was built for.
    pub fn taps(&self) -> usize {
        self.stage1[0].c_in()
    }

    pub fn layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.stage1.iter().chain(&self.stage2)
    }

    pub fn layer_count(&self) -> usize {
        self.stage1.len() + self.stage2.len()
    }

    pub fn param_count(&self) -> usize {
        count_params(&self.stage1) + count_params(&self.stage2)
    }

    /// Refines the Wiener gains of one frame. `gains` is
    /// `[grid_rows·grid_cols, T, C, B, B]` with blocks in row-major grid order.
    pub fn refine(&self, gains: Tensor, grid: (usize, usize)) -> Result<Tensor> {
        let d = gains.dims().to_vec();
        if d.len() != 5 {
            return Err(Error::DimMismatch(format!("gain tensor dims {d:?} are not 5-D")));
        }
        if d[0] != grid.0 * grid.1 {
            return Err(Error::DimMismatch(format!(
                "{} blocks supplied for a {}x{} grid",
                d[0], grid.0, grid.1
            )));
        }
        if d[1] != self.taps() {
            return Err(Error::DimMismatch(format!(
                "gains have {} taps, net expects {}",
                d[1],
                self.taps()
            )));
        }
        let sizes = [("gy", grid.0), ("gx", grid.1), ("h", d[3]), ("w", d[4])];
        let x = run_chain(&self.stage1, gains)?;
        let x = rearrange(&x, "(gy gx) t c h w -> (h w) t c gy gx", &sizes)?;
        let x = run_chain(&self.stage2, x)?;
        rearrange(&x, "(h w) t c gy gx -> (gy gx) t c h w", &sizes)
    }
}

pub fn build_coring_net(bundle: &WeightBundle) -> Result<CoringNet> {
    CoringNet::from_bundle(bundle)
}

pub fn refine_gains(net: &CoringNet, gains: Tensor, grid: (usize, usize)) -> Result<Tensor> {
    net.refine(gains, grid)
}

/// Four-layer 2-D net mapping an RGB frame to a per-pixel noise STD map.
#[derive(Debug, Clone)]
pub struct NoiseNet {
    layers: Vec<ConvLayer>,
}

impl NoiseNet {
    pub fn from_bundle(bundle: &WeightBundle) -> Result<Self> {
        let slope = leaky_slope(bundle)?;
        let layers = load_chain(bundle, "noise.k", 2, slope)?;
        if layers[0].c_in() != CHANNELS || layers.last().unwrap().c_out() != 1 {
            return Err(Error::DimMismatch(format!(
                "noise net must map {CHANNELS} channels to 1, maps {} to {}",
                layers[0].c_in(),
                layers.last().unwrap().c_out()
            )));
        }
        Ok(Self { layers })
    }

    pub fn param_count(&self) -> usize {
        count_params(&self.layers)
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    /// `frame` is 3×H×W on the 8-bit scale; returns the H×W map, made
    /// nonnegative by absolute value.
    pub fn estimate(&self, frame: &[f32], height: usize, width: usize) -> Result<Vec<f32>> {
        if frame.len() != CHANNELS * height * width {
            return Err(Error::DimMismatch(format!(
                "frame has {} samples, expected 3x{height}x{width}",
                frame.len()
            )));
        }
        let x = Tensor::new(vec![1, CHANNELS, height, width], frame.to_vec())?;
        let mut y = x;
        for layer in &self.layers {
            y = conv_forward(&y, layer)?;
        }
        Ok(y.into_data().into_iter().map(f32::abs).collect())
    }
}

pub fn estimate_noise_map(net: &NoiseNet, frame: &[f32], height: usize, width: usize) -> Result<Vec<f32>> {
    net.estimate(frame, height, width)
}

fn fill_bundle(
    bundle: &mut WeightBundle,
    prefix: &str,
    dims: &[Vec<usize>],
    mut init: impl FnMut(&[usize]) -> Tensor,
) -> Result<()> {
    for (i, d) in dims.iter().enumerate() {
        bundle.insert(format!("{prefix}{i}"), init(d))?;
    }
    Ok(())
}

/// Delta kernels routing channel `i` to channel `i` for `i < min(c_in, c_out)`.
fn delta_kernel(dims: &[usize]) -> Tensor {
    let mut t = Tensor::zeros(dims.to_vec());
    let taps: usize = dims[2..].iter().product();
    let (c_out, c_in) = (dims[0], dims[1]);
    for i in 0..c_out.min(c_in) {
        t.data_mut()[(i * c_in + i) * taps + taps / 2] = 1.0;
    }
    t
}

/// Coring bundle whose net passes nonnegative gains through unchanged.
pub fn identity_coring_bundle(layout: CoringLayout) -> Result<WeightBundle> {
    let (s1, s2) = layout.kernel_dims();
    let mut b = WeightBundle::new();
    fill_bundle(&mut b, "coring.s1.k", &s1, delta_kernel)?;
    fill_bundle(&mut b, "coring.s2.k", &s2, delta_kernel)?;
    Ok(b)
}

pub fn zero_coring_bundle(layout: CoringLayout) -> Result<WeightBundle> {
    let (s1, s2) = layout.kernel_dims();
    let mut b = WeightBundle::new();
    fill_bundle(&mut b, "coring.s1.k", &s1, |d| Tensor::zeros(d.to_vec()))?;
    fill_bundle(&mut b, "coring.s2.k", &s2, |d| Tensor::zeros(d.to_vec()))?;
    Ok(b)
}

fn random_kernel(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor {
    // He-style scale keeps activations bounded through the chain.
    let fan_in: usize = dims[1..].iter().product();
    let scale = (2.0 / fan_in as f32).sqrt();
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(dims.to_vec(), data).unwrap()
}

pub fn random_coring_bundle(layout: CoringLayout, seed: u64) -> Result<WeightBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (s1, s2) = layout.kernel_dims();
    let mut b = WeightBundle::new();
    fill_bundle(&mut b, "coring.s1.k", &s1, |d| random_kernel(&mut rng, d))?;
    fill_bundle(&mut b, "coring.s2.k", &s2, |d| random_kernel(&mut rng, d))?;
    Ok(b)
}

pub fn zero_noise_bundle() -> Result<WeightBundle> {
    let mut b = WeightBundle::new();
    fill_bundle(&mut b, "noise.k", &noise_kernel_dims(), |d| Tensor::zeros(d.to_vec()))?;
    Ok(b)
}

pub fn random_noise_bundle(seed: u64) -> Result<WeightBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = WeightBundle::new();
    fill_bundle(&mut b, "noise.k", &noise_kernel_dims(), |d| random_kernel(&mut rng, d))?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_param_counts() {
        // Σ c_out·c_in·27: stage 1 = 5·40 + 4·40·40 + 40·5, stage 2 = 5·40 + 3·40·40 + 40·5.
        let layout = CoringLayout::default();
        assert_eq!(layout.param_count(), 183_600 + 140_400);
        let net = CoringNet::from_bundle(&zero_coring_bundle(layout).unwrap()).unwrap();
        assert_eq!(net.param_count(), 324_000);
        assert_eq!(net.layer_count(), 11);
        let noise = NoiseNet::from_bundle(&zero_noise_bundle().unwrap()).unwrap();
        assert_eq!(noise.param_count(), 7_920);
    }

    #[test]
    fn missing_stage_two() {
        let mut full = identity_coring_bundle(CoringLayout::default()).unwrap();
        let mut partial = WeightBundle::new();
        for (name, t) in full.iter() {
            if !name.starts_with("coring.s2.") {
                partial.insert(name, t.clone()).unwrap();
            }
        }
        assert!(matches!(
            CoringNet::from_bundle(&partial),
            Err(Error::MissingTensor(n)) if n == "coring.s2.k0"
        ));
        full = WeightBundle::new();
        full.insert("coring.s1.k0", Tensor::zeros(vec![40, 5, 3, 3, 3]))
            .unwrap();
        full.insert("coring.s1.k1", Tensor::zeros(vec![5, 20, 3, 3, 3]))
            .unwrap();
        full.insert("coring.s2.k0", Tensor::zeros(vec![5, 5, 3, 3, 3])).unwrap();
        assert!(matches!(CoringNet::from_bundle(&full), Err(Error::DimMismatch(_))));
    }

    fn random_gains(n: usize, b: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = n * 5 * 3 * b * b;
        Tensor::new(
            vec![n, 5, 3, b, b],
            (0..len).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_and_zero_nets() {
        let layout = CoringLayout::default();
        let gains = random_gains(6, 4, 5);
        let id = CoringNet::from_bundle(&identity_coring_bundle(layout).unwrap()).unwrap();
        assert_eq!(id.refine(gains.clone(), (2, 3)).unwrap(), gains);
        let zero = CoringNet::from_bundle(&zero_coring_bundle(layout).unwrap()).unwrap();
        let out = zero.refine(gains.clone(), (2, 3)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert!(id.refine(gains, (3, 3)).is_err());
    }

    #[test]
    fn random_net_shape_contract() {
        let net = CoringNet::from_bundle(&random_coring_bundle(CoringLayout::default(), 9).unwrap()).unwrap();
        let gains = random_gains(4, 4, 6);
        let out = net.refine(gains.clone(), (2, 2)).unwrap();
        assert_eq!(out.dims(), gains.dims());
        assert!(out.data().iter().all(|v| v.is_finite()));
        assert_eq!(net.refine(gains, (2, 2)).unwrap(), out);
    }

    #[test]
    fn noise_map_contract() {
        let (h, w) = (12, 10);
        let frame: Vec<f32> = (0..3 * h * w).map(|i| (i % 37) as f32).collect();
        let zero = NoiseNet::from_bundle(&zero_noise_bundle().unwrap()).unwrap();
        assert!(zero.estimate(&frame, h, w).unwrap().iter().all(|&v| v == 0.0));
        let rnd = NoiseNet::from_bundle(&random_noise_bundle(3).unwrap()).unwrap();
        let map = rnd.estimate(&frame, h, w).unwrap();
        assert_eq!(map.len(), h * w);
        assert!(map.iter().all(|&v| v >= 0.0));
        assert!(rnd.estimate(&frame, h, w + 1).is_err());
    }

    #[test]
    fn leaky_slope_override() {
        let mut b = zero_noise_bundle().unwrap();
        b.insert(LEAKY_SLOPE_TENSOR, Tensor::new(vec![1], vec![0.2]).unwrap())
            .unwrap();
        let net = NoiseNet::from_bundle(&b).unwrap();
        assert_eq!(net.layers()[0].activation(), Activation::Leaky(0.2));
        assert_eq!(net.layers()[3].activation(), Activation::None);
    }
}
