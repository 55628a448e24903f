//! Dense `f32` tensors and the small set of differentiable operations the
//! tracker networks are built from.
//!
//! Feature maps are stored height-major with channels innermost
//! (`H x W x C`, row-major), so a pixel's channel vector is contiguous.
//! Every kernel in this module assumes that layout.

mod gemm;
pub mod ops;
pub mod resize;
pub mod tape;

pub use ops::{channel_scale, conv2d, crop, cross_correlate, max_pool, relu, sigmoid};
pub use resize::{bicubic_upsample, bilinear_resize};
pub use tape::{dense, grid_max, GradTape, Gradients, Span, Var};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::contract(format!(
                "shape {shape:?} holds {n} values but {} were supplied",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Builds an `H x W x C` tensor from a closure over `(row, col, channel)`.
    pub fn from_fn3(
        h: usize,
        w: usize,
        c: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(h * w * c);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data.push(f(y, x, ch));
                }
            }
        }
        Tensor {
            shape: vec![h, w, c],
            data,
        }
    }

    pub fn scalar(v: f32) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn vector(v: Vec<f32>) -> Self {
        Tensor {
            shape: vec![v.len()],
            data: v,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// `(height, width, channels)` of a rank-3 feature map.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[h, w, c] => Ok((h, w, c)),
            s => Err(Error::contract(format!(
                "expected an HxWxC tensor, got shape {s:?}"
            ))),
        }
    }

    #[inline]
    pub fn at3(&self, y: usize, x: usize, c: usize) -> f32 {
        let (w, ch) = (self.shape[1], self.shape[2]);
        self.data[(y * w + x) * ch + c]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::contract(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, k: f32) -> Self {
        self.map(|v| v * k)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.check_same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f32 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn min(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }

    /// Row-major index of the largest value; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_shape(&self, other: &Tensor, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::contract(format!(
                "{op}: shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

/// A convolution layer's parameters. Weights are laid out
/// `kH x kW x inC x outC`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    pub weights: Tensor,
    pub bias: Vec<f32>,
    pub stride: usize,
    pub padding: usize,
}

impl ConvKernel {
    pub fn new(weights: Tensor, bias: Vec<f32>, stride: usize, padding: usize) -> Result<Self> {
        let k = ConvKernel {
            weights,
            bias,
            stride,
            padding,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.weights.shape();
        if s.len() != 4 {
            return Err(Error::contract(format!(
                "conv weights must be rank 4, got {s:?}"
            )));
        }
        if s[0] == 0 || s[1] == 0 || s[2] == 0 || s[3] == 0 {
            return Err(Error::contract(format!(
                "conv weights have an empty axis: {s:?}"
            )));
        }
        if self.stride == 0 {
            return Err(Error::contract("conv stride must be >= 1"));
        }
        if self.bias.len() != s[3] {
            return Err(Error::contract(format!(
                "bias length {} does not match outC {}",
                self.bias.len(),
                s[3]
            )));
        }
        Ok(())
    }

    /// `(kH, kW, inC, outC)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let s = self.weights.shape();
        (s[0], s[1], s[2], s[3])
    }

    /// A 1x1 kernel that copies `channels` inputs straight through.
    pub fn identity_1x1(channels: usize) -> Self {
        let mut w = Tensor::zeros(&[1, 1, channels, channels]);
        for c in 0..channels {
            w.data_mut()[c * channels + c] = 1.0;
        }
        ConvKernel {
            weights: w,
            bias: vec![0.0; channels],
            stride: 1,
            padding: 0,
        }
    }
}
