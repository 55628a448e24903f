//! Forward-only versions of the tensor operations. The tape in
//! [`super::tape`] reuses the same kernels and adds gradients.

use super::gemm::{self, Geometry};
use super::{ConvKernel, Tensor};
use crate::error::{Error, Result};

pub(crate) fn conv_geometry(
    input_shape: (usize, usize, usize),
    kernel: (usize, usize, usize, usize),
    stride: usize,
    pad: usize,
) -> Result<Geometry> {
    let (h, w, c) = input_shape;
    let (kh, kw, inc, _) = kernel;
    if c != inc {
        return Err(Error::contract(format!(
            "conv2d channel axis: input has {c} channels, kernel expects {inc}"
        )));
    }
    if stride == 0 {
        return Err(Error::contract("conv2d: stride must be >= 1"));
    }
    let oh = gemm::out_extent(h, kh, stride, pad).ok_or_else(|| {
        Error::contract(format!(
            "conv2d height axis: input height {h} (pad {pad}) smaller than kernel height {kh}"
        ))
    })?;
    let ow = gemm::out_extent(w, kw, stride, pad).ok_or_else(|| {
        Error::contract(format!(
            "conv2d width axis: input width {w} (pad {pad}) smaller than kernel width {kw}"
        ))
    })?;
    Ok(Geometry {
        h,
        w,
        c,
        kh,
        kw,
        stride,
        pad,
        oh,
        ow,
    })
}

/// Convolution on lowered input. Returns the output and the im2col matrix
/// (kept by the tape for the weight gradient).
pub(crate) fn conv_lowered(
    input: &Tensor,
    weights: &Tensor,
    bias: &[f32],
    g: &Geometry,
) -> (Tensor, Vec<f32>) {
    let outc = weights.shape()[3];
    let cols = gemm::im2col(input.data(), g);
    let p = g.positions();
    let mut out = Vec::with_capacity(p * outc);
    for _ in 0..p {
        out.extend_from_slice(bias);
    }
    gemm::gemm(p, g.k(), outc, &cols, weights.data(), 1.0, &mut out);
    (
        Tensor {
            shape: vec![g.oh, g.ow, outc],
            data: out,
        },
        cols,
    )
}

/// 2-D convolution (cross-correlation convention) with bias and zero padding.
pub fn conv2d(input: &Tensor, kernel: &ConvKernel) -> Result<Tensor> {
    kernel.validate()?;
    let g = conv_geometry(input.dims3()?, kernel.dims(), kernel.stride, kernel.padding)?;
    Ok(conv_lowered(input, &kernel.weights, &kernel.bias, &g).0)
}

pub(crate) fn pool_geometry(
    input: &Tensor,
    window: (usize, usize),
    stride: (usize, usize),
) -> Result<(usize, usize, usize, usize, usize)> {
    let (h, w, c) = input.dims3()?;
    if window.0 == 0 || window.1 == 0 || stride.0 == 0 || stride.1 == 0 {
        return Err(Error::contract("max_pool: window and stride must be >= 1"));
    }
    if window.0 > h || window.1 > w {
        return Err(Error::contract(format!(
            "max_pool: window {window:?} larger than input {h}x{w}"
        )));
    }
    Ok((
        h,
        w,
        c,
        (h - window.0) / stride.0 + 1,
        (w - window.1) / stride.1 + 1,
    ))
}

/// Max pooling that also reports, per output element, the flat input index
/// of the winning value (first maximum on ties).
pub(crate) fn max_pool_indexed(
    input: &Tensor,
    window: (usize, usize),
    stride: (usize, usize),
) -> Result<(Tensor, Vec<u32>)> {
    let (_, w, c, oh, ow) = pool_geometry(input, window, stride)?;
    let src = input.data();
    let mut out = vec![f32::NEG_INFINITY; oh * ow * c];
    let mut idx = vec![0u32; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let o = (oy * ow + ox) * c;
            for ky in 0..window.0 {
                for kx in 0..window.1 {
                    let base = ((oy * stride.0 + ky) * w + ox * stride.1 + kx) * c;
                    for ch in 0..c {
                        let v = src[base + ch];
                        if v > out[o + ch] {
                            out[o + ch] = v;
                            idx[o + ch] = (base + ch) as u32;
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor {
            shape: vec![oh, ow, c],
            data: out,
        },
        idx,
    ))
}

pub fn max_pool(input: &Tensor, window: (usize, usize), stride: (usize, usize)) -> Result<Tensor> {
    Ok(max_pool_indexed(input, window, stride)?.0)
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

#[inline]
pub(crate) fn sigmoid_scalar(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    input.map(sigmoid_scalar)
}

pub(crate) fn corr_geometry(template: &Tensor, search: &Tensor) -> Result<Geometry> {
    let (th, tw, tc) = template.dims3()?;
    let (sh, sw, sc) = search.dims3()?;
    if tc != sc {
        return Err(Error::contract(format!(
            "cross_correlate channel axis: template has {tc} channels, search has {sc}"
        )));
    }
    if th > sh || tw > sw {
        return Err(Error::contract(format!(
            "cross_correlate: template {th}x{tw} larger than search {sh}x{sw}"
        )));
    }
    Ok(Geometry {
        h: sh,
        w: sw,
        c: sc,
        kh: th,
        kw: tw,
        stride: 1,
        pad: 0,
        oh: sh - th + 1,
        ow: sw - tw + 1,
    })
}

/// Slides `template` over `search` and returns the channel-summed inner
/// product at every offset, shaped `(S-D+1) x (S-D+1) x 1`.
pub fn cross_correlate(template: &Tensor, search: &Tensor) -> Result<Tensor> {
    let g = corr_geometry(template, search)?;
    let cols = gemm::im2col(search.data(), &g);
    let mut out = vec![0.0f32; g.positions()];
    gemm::gemm(
        g.positions(),
        g.k(),
        1,
        &cols,
        template.data(),
        0.0,
        &mut out,
    );
    Ok(Tensor {
        shape: vec![g.oh, g.ow, 1],
        data: out,
    })
}

/// Multiplies channel `c` of an `H x W x C` map by `weights[c]`.
pub fn channel_scale(features: &Tensor, weights: &[f32]) -> Result<Tensor> {
    let (_, _, c) = features.dims3()?;
    if weights.len() != c {
        return Err(Error::contract(format!(
            "channel_scale: {} weights for {c} channels",
            weights.len()
        )));
    }
    let mut out = features.clone();
    for px in out.data_mut().chunks_exact_mut(c) {
        for (v, w) in px.iter_mut().zip(weights) {
            *v *= *w;
        }
    }
    Ok(out)
}

/// Spatial crop of an `H x W x C` map.
pub fn crop(
    input: &Tensor,
    top: usize,
    left: usize,
    height: usize,
    width: usize,
) -> Result<Tensor> {
    let (h, w, c) = input.dims3()?;
    if top + height > h || left + width > w || height == 0 || width == 0 {
        return Err(Error::contract(format!(
            "crop {height}x{width} at ({top},{left}) does not fit in {h}x{w}"
        )));
    }
    let mut data = Vec::with_capacity(height * width * c);
    for y in top..top + height {
        let start = (y * w + left) * c;
        data.extend_from_slice(&input.data()[start..start + width * c]);
    }
    Ok(Tensor {
        shape: vec![height, width, c],
        data,
    })
}
