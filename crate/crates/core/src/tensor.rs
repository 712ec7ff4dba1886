//! Minimal dense tensors for auxiliary-network inference: bias-free N-D
//! convolution, leaky rectifier and axis rearrangement.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Leaky rectifier slope used unless a bundle overrides it.
pub const DEFAULT_LEAKY_SLOPE: f32 = 0.1;

/// Row-major f32 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::DimMismatch(format!(
                "dims {dims:?} need {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n = dims.iter().product();
        Self {
            dims,
            data: vec![0.0; n],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        Tensor::new(dims, self.data)
    }

    /// Reorders axes so that output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor> {
        let nd = self.dims.len();
        let mut seen = vec![false; nd];
        if perm.len() != nd || perm.iter().any(|&p| p >= nd || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::DimMismatch(format!(
                "{perm:?} is not a permutation of {nd} axes"
            )));
        }
        let in_strides = strides(&self.dims);
        let out_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; nd];
        let mut offset = 0usize;
        for _ in 0..self.data.len() {
            out.push(self.data[offset]);
            for ax in (0..nd).rev() {
                idx[ax] += 1;
                offset += src_strides[ax];
                if idx[ax] < out_dims[ax] {
                    break;
                }
                offset -= src_strides[ax] * out_dims[ax];
                idx[ax] = 0;
            }
        }
        Ok(Tensor {
            dims: out_dims,
            data: out,
        })
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    None,
    Leaky(f32),
}

/// Bias-free convolution with zero "same" padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    kernel: Tensor,
    activation: Activation,
}

impl ConvLayer {
    /// `kernel` has dims `[c_out, c_in, k...]` with odd spatial extents.
    pub fn new(kernel: Tensor, activation: Activation) -> Result<Self> {
        let d = kernel.dims();
        if d.len() < 3 {
            return Err(Error::DimMismatch(format!(
                "kernel dims {d:?} need [c_out, c_in, k...]"
            )));
        }
        if let Some(k) = d[2..].iter().find(|&&k| k % 2 == 0) {
            return Err(Error::DimMismatch(format!("even kernel extent {k} in {d:?}")));
        }
        Ok(Self { kernel, activation })
    }

    pub fn kernel(&self) -> &Tensor {
        &self.kernel
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn c_out(&self) -> usize {
        self.kernel.dims[0]
    }

    pub fn c_in(&self) -> usize {
        self.kernel.dims[1]
    }

    pub fn spatial_rank(&self) -> usize {
        self.kernel.dims.len() - 2
    }

    pub fn param_count(&self) -> usize {
        self.kernel.len()
    }
}

/// Cross-correlation of `x` (`[n, c_in, d...]`) with the layer kernel,
/// zero-padded so spatial extents are preserved, followed by the layer's
/// activation.
pub fn conv_forward(x: &Tensor, layer: &ConvLayer) -> Result<Tensor> {
    let rank = layer.spatial_rank();
    if x.dims.len() != rank + 2 {
        return Err(Error::DimMismatch(format!(
            "input dims {:?} do not match a {rank}-D kernel",
            x.dims
        )));
    }
    let (n, c_in) = (x.dims[0], x.dims[1]);
    if c_in != layer.c_in() {
        return Err(Error::DimMismatch(format!(
            "input has {c_in} channels, kernel expects {}",
            layer.c_in()
        )));
    }
    let c_out = layer.c_out();
    let spatial = &x.dims[2..];
    let ksize = &layer.kernel.dims[2..];
    let plane: usize = spatial.iter().product();
    let taps: usize = ksize.iter().product();
    let width = spatial[rank - 1];
    let rows = plane / width.max(1);

    let mut out_dims = x.dims.clone();
    out_dims[1] = c_out;
    let mut out = vec![0.0f32; n * c_out * plane];
    if plane == 0 {
        return Tensor::new(out_dims, out);
    }

    let kdata = layer.kernel.data();
    let sp_strides = strides(spatial);
    let k_strides = strides(ksize);
    // Per tap: spatial offsets relative to the centre.
    let offsets: Vec<Vec<isize>> = (0..taps)
        .map(|tap| {
            (0..rank)
                .map(|a| ((tap / k_strides[a]) % ksize[a]) as isize - (ksize[a] / 2) as isize)
                .collect()
        })
        .collect();

    let mut row_idx = vec![0usize; rank];
    for b in 0..n {
        for co in 0..c_out {
            let dst = &mut out[(b * c_out + co) * plane..(b * c_out + co + 1) * plane];
            for ci in 0..c_in {
                let src = &x.data[(b * c_in + ci) * plane..(b * c_in + ci + 1) * plane];
                let wbase = (co * c_in + ci) * taps;
                for (tap, off) in offsets.iter().enumerate() {
                    let w = kdata[wbase + tap];
                    if w == 0.0 {
                        continue;
                    }
                    let dx = off[rank - 1];
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (width as isize - dx).min(width as isize).max(0) as usize;
                    if x0 >= x1 {
                        continue;
                    }
                    // Walk every row (all axes but the last) of the output.
                    row_idx.iter_mut().for_each(|v| *v = 0);
                    'rows: for r in 0..rows {
                        if r > 0 {
                            for a in (0..rank - 1).rev() {
                                row_idx[a] += 1;
                                if row_idx[a] < spatial[a] {
                                    break;
                                }
                                row_idx[a] = 0;
                            }
                        }
                        let mut src_off = 0isize;
                        for a in 0..rank - 1 {
                            let s = row_idx[a] as isize + off[a];
                            if s < 0 || s >= spatial[a] as isize {
                                continue 'rows;
                            }
                            src_off += s * sp_strides[a] as isize;
                        }
                        let dst_off = r * width;
                        let src_row = &src[src_off as usize..src_off as usize + width];
                        let dst_row = &mut dst[dst_off..dst_off + width];
                        let shifted = &src_row[(x0 as isize + dx) as usize..(x1 as isize + dx) as usize];
                        for (d, s) in dst_row[x0..x1].iter_mut().zip(shifted) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
    }
    let mut t = Tensor::new(out_dims, out)?;
    if let Activation::Leaky(slope) = layer.activation {
        leaky_relu_in_place(&mut t, slope);
    }
    Ok(t)
}

pub fn leaky_relu(x: &Tensor, slope: f32) -> Tensor {
    let mut y = x.clone();
    leaky_relu_in_place(&mut y, slope);
    y
}

fn leaky_relu_in_place(x: &mut Tensor, slope: f32) {
    for v in &mut x.data {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

/// Σ c_out·c_in·Πk over all layers.
pub fn count_params(layers: &[ConvLayer]) -> usize {
    layers.iter().map(ConvLayer::param_count).sum()
}

type Groups = Vec<Vec<String>>;

fn parse_side(side: &str) -> Result<Groups> {
    let mut groups = Vec::new();
    let mut current: Option<Vec<String>> = None;
    let spaced = side.replace('(', " ( ").replace(')', " ) ");
    for tok in spaced.split_whitespace() {
        match tok {
            "(" => {
                if current.is_some() {
                    return Err(Error::Format(format!("nested group in {side:?}")));
                }
                current = Some(Vec::new());
            }
            ")" => {
                let g = current
                    .take()
                    .ok_or_else(|| Error::Format(format!("unbalanced ')' in {side:?}")))?;
                groups.push(g);
            }
            name => match current.as_mut() {
                Some(g) => g.push(name.to_string()),
                None => groups.push(vec![name.to_string()]),
            },
        }
    }
    if current.is_some() {
        return Err(Error::Format(format!("unclosed group in {side:?}")));
    }
    Ok(groups)
}

/// einops-style axis relayout, e.g. `"b t c mx my h w -> (b mx my) t c h w"`.
///
/// Groups on the left are split using `sizes`; at most one axis per group may
/// be left for inference. Every axis must appear exactly once on each side.
pub fn rearrange(x: &Tensor, pattern: &str, sizes: &[(&str, usize)]) -> Result<Tensor> {
    let (lhs, rhs) = pattern
        .split_once("->")
        .ok_or_else(|| Error::Format(format!("pattern {pattern:?} has no '->'")))?;
    let lhs = parse_side(lhs)?;
    let rhs = parse_side(rhs)?;
    if lhs.len() != x.dims.len() {
        return Err(Error::DimMismatch(format!(
            "pattern has {} input axes, tensor has {}",
            lhs.len(),
            x.dims.len()
        )));
    }
    let mut known: HashMap<&str, usize> = sizes.iter().copied().collect();
    let mut elementary: Vec<&str> = Vec::new();
    for (group, &extent) in lhs.iter().zip(&x.dims) {
        let unknown: Vec<&str> = group
            .iter()
            .map(String::as_str)
            .filter(|a| !known.contains_key(a))
            .collect();
        let fixed: usize = group.iter().filter_map(|a| known.get(a.as_str())).product();
        match unknown.as_slice() {
            [] if fixed == extent => {}
            [one] if fixed > 0 && extent % fixed == 0 => {
                known.insert(one, extent / fixed);
            }
            _ => {
                return Err(Error::DimMismatch(format!(
                    "axis group {group:?} cannot split extent {extent}"
                )))
            }
        }
        elementary.extend(group.iter().map(String::as_str));
    }
    let rhs_flat: Vec<&str> = rhs.iter().flatten().map(String::as_str).collect();
    let mut sorted_l = elementary.clone();
    let mut sorted_r = rhs_flat.clone();
    sorted_l.sort_unstable();
    sorted_r.sort_unstable();
    if sorted_l != sorted_r || sorted_l.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Format(format!(
            "pattern {pattern:?} must use each axis exactly once per side"
        )));
    }
    let expanded: Vec<usize> = elementary.iter().map(|a| known[a]).collect();
    let perm: Vec<usize> = rhs_flat
        .iter()
        .map(|a| elementary.iter().position(|e| e == a).unwrap())
        .collect();
    let out_dims: Vec<usize> = rhs
        .iter()
        .map(|g| g.iter().map(|a| known[a.as_str()]).product())
        .collect();
    x.clone().reshape(expanded)?.permute(&perm)?.reshape(out_dims)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_examples() {
        let x = Tensor::new(vec![3], vec![2.0, -2.0, 0.0]).unwrap();
        let y = leaky_relu(&x, 0.1);
        assert_eq!(y.data()[0], 2.0);
        assert!((y.data()[1] + 0.2).abs() < 1e-7);
        assert_eq!(leaky_relu(&x, 1.0), x);
    }

    #[test]
    fn param_counts() {
        let l = ConvLayer::new(Tensor::zeros(vec![40, 5, 3, 3, 3]), Activation::None).unwrap();
        assert_eq!(count_params(std::slice::from_ref(&l)), 5_400);
        assert_eq!(count_params(&[]), 0);
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(ConvLayer::new(Tensor::zeros(vec![1, 1, 2, 3]), Activation::None).is_err());
    }

    #[test]
    fn channel_mismatch_rejected() {
        let l = ConvLayer::new(Tensor::zeros(vec![1, 2, 3]), Activation::None).unwrap();
        let x = Tensor::zeros(vec![1, 3, 5]);
        assert!(conv_forward(&x, &l).is_err());
    }

    #[test]
    fn delta_kernel_is_identity() {
        let c = 2;
        let mut k = Tensor::zeros(vec![c, c, 3, 3]);
        for i in 0..c {
            k.data_mut()[(i * c + i) * 9 + 4] = 1.0;
        }
        let l = ConvLayer::new(k, Activation::None).unwrap();
        let x = Tensor::new(vec![1, c, 4, 5], (0..40).map(|v| v as f32 - 20.0).collect()).unwrap();
        assert_eq!(conv_forward(&x, &l).unwrap(), x);
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let l = ConvLayer::new(Tensor::zeros(vec![3, 2, 3, 3, 3]), Activation::Leaky(0.1)).unwrap();
        let x = Tensor::new(vec![1, 2, 3, 4, 4], vec![1.5; 96]).unwrap();
        let y = conv_forward(&x, &l).unwrap();
        assert_eq!(y.dims(), &[1, 3, 3, 4, 4]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn transpose_and_merge() {
        let x = Tensor::new(vec![2, 3], (0..6).map(|v| v as f32).collect()).unwrap();
        let y = rearrange(&x, "i j -> j i", &[]).unwrap();
        assert_eq!(y.dims(), &[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(x.data()[i * 3 + j], y.data()[j * 2 + i]);
            }
        }
        let m = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let merged = rearrange(&m, "a b -> (a b)", &[]).unwrap();
        assert_eq!(merged.dims(), &[4]);
        assert_eq!(merged.data(), m.data());
    }

    #[test]
    fn coring_layout_roundtrip() {
        let dims = vec![2, 5, 3, 2, 3, 4, 4];
        let n: usize = dims.iter().product();
        let x = Tensor::new(dims, (0..n).map(|v| v as f32).collect()).unwrap();
        let y = rearrange(&x, "b t c mx my h w -> (b mx my) t c h w", &[]).unwrap();
        assert_eq!(y.dims(), &[12, 5, 3, 4, 4]);
        let back = rearrange(
            &y,
            "(b mx my) t c h w -> b t c mx my h w",
            &[("b", 2), ("mx", 2), ("my", 3)],
        )
        .unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn rearrange_count_mismatch() {
        let x = Tensor::zeros(vec![6]);
        assert!(rearrange(&x, "(a b) -> a b", &[("a", 4)]).is_err());
        assert!(rearrange(&x, "a -> a a", &[]).is_err());
        assert!(rearrange(&x, "a b -> a b", &[]).is_err());
    }
}
